use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zpf_cli::commands::{cmd_angles, cmd_darkrate, cmd_rainbow, cmd_ratios, cmd_simulate};
use zpf_cli::config::{Format, RunConfig};
use zpf_cli::output::{write_atomic, Table};
use zpf_cli::CliError;
use zpf_core::rainbow::Engine;

#[derive(Parser, Debug)]
#[command(name = "zpfsim", version, about = "Zeropoint-field simulation of parametric rainbows")]
struct Cli {
    /// TOML run configuration (the shipped default when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Matched down- and up-conversion angles across the band.
    Angles,
    /// Main and satellite rainbow table.
    Rainbow,
    /// Conjugate-channel rate ratios at one frequency.
    Ratios {
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Vacuum click probability against window length.
    Darkrate {
        /// Comma-separated window sizes.
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<usize>>,
    },
    /// Raw Monte Carlo output amplitudes of one three-wave system.
    Simulate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    Covariance,
    Montecarlo,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default_config(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(e) = cli.engine {
        cfg.engine = match e {
            EngineArg::Covariance => Engine::Covariance,
            EngineArg::Montecarlo => Engine::MonteCarlo,
        };
    }
    if let Some(o) = cli.output {
        cfg.output.path = Some(o);
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }

    let table: Table = match cli.command {
        Command::Angles => cmd_angles(&cfg)?,
        Command::Rainbow => cmd_rainbow(&cfg)?.1,
        Command::Ratios { omega } => cmd_ratios(&cfg, omega)?,
        Command::Darkrate { windows } => cmd_darkrate(&cfg, windows)?,
        Command::Simulate => cmd_simulate(&cfg)?,
    };
    let text = table.render(cfg.output.format);
    match &cfg.output.path {
        Some(path) => write_atomic(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("writing standard output: {e}"))),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zpfsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
