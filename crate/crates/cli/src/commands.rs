use zpf_core::coupling::{apply, integrate_three_wave, propagate_covariance, squeeze_pair};
use zpf_core::detection::{
    channel_rate, dark_rate_curve, monte_carlo_moments, ratio_down, ratio_down_with_error,
};
use zpf_core::dispersion::{match_down, match_up};
use zpf_core::rainbow::{
    evaluate_point, main_system, omega_grid, satellite_system, sweep, Engine, RainbowTable,
    SweepRequest,
};
use zpf_core::zpf::{sample_vacuum, vacuum_state, Mode, Polarization, Role};
use zpf_core::Error;

use crate::config::{RunConfig, SystemKind};
use crate::output::{Cell, Table};
use crate::CliError;

pub fn sweep_request(cfg: &RunConfig) -> SweepRequest {
    SweepRequest {
        omega_min: cfg.sweep.omega_min,
        omega_max: cfg.sweep.omega_max,
        steps: cfg.sweep.steps,
        crystal: cfg.crystal.clone(),
        detector: cfg.detector,
        couplings: cfg.couplings.resolve(&cfg.crystal),
        engine: cfg.engine,
        trials: cfg.trials,
        seed: cfg.seed,
        zero_satellite_mismatch: false,
    }
}

pub const ANGLE_COLUMNS: [&str; 9] = [
    "omega",
    "theta_d_int",
    "theta_d_ext",
    "theta_u_int",
    "theta_u_ext",
    "residual_d",
    "residual_u",
    "theta_u_over_theta_d",
    "theta_d_conjugate_ext",
];

/// Matched angles across the sweep band; dispersion only.
pub fn cmd_angles(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.validate()?;
    let mut table = Table::new(&ANGLE_COLUMNS, &cfg.fingerprint());
    for w in omega_grid(cfg.sweep.omega_min, cfg.sweep.omega_max, cfg.sweep.steps)? {
        let d = match_down(w, &cfg.crystal).map_err(|e| {
            CliError::Core(Error::Band(format!("omega = {w}: {e}")))
        })?;
        let u = match match_up(w, &cfg.crystal) {
            Ok(u) => Some(u),
            Err(Error::NoSolution(_)) | Err(Error::Domain { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let ratio = u.and_then(|u| {
            (d.theta_in_external != 0.0).then(|| u.theta_in_external / d.theta_in_external)
        });
        table.push(vec![
            w.into(),
            d.theta_in_internal.into(),
            d.theta_in_external.into(),
            u.map(|u| u.theta_in_internal).into(),
            u.map(|u| u.theta_in_external).into(),
            d.residual_dk.into(),
            u.map(|u| u.residual_dk).into(),
            ratio.into(),
            d.theta_out_external.into(),
        ]);
    }
    Ok(table)
}

pub const RAINBOW_COLUMNS: [&str; 15] = [
    "omega",
    "theta_d_ext",
    "theta_u_ext",
    "main_rate",
    "main_rate_se",
    "conjugate_rate",
    "conjugate_rate_se",
    "satellite_rate",
    "satellite_rate_se",
    "upper_above_zeropoint",
    "upper_above_zeropoint_se",
    "eq1_ratio",
    "eq1_ratio_se",
    "eq2_ratio",
    "present",
];

pub fn cmd_rainbow(cfg: &RunConfig) -> Result<(RainbowTable, Table), CliError> {
    cfg.validate()?;
    let mut rainbow = sweep(&sweep_request(cfg))?;
    rainbow.config_fingerprint = cfg.fingerprint();
    let mut table = Table::new(&RAINBOW_COLUMNS, &rainbow.config_fingerprint);
    for p in &rainbow.points {
        table.push(vec![
            p.omega.into(),
            p.theta_d_ext.into(),
            p.theta_u_ext.into(),
            p.main_rate.into(),
            p.main_rate_se.into(),
            p.conjugate_rate.into(),
            p.conjugate_rate_se.into(),
            p.satellite_rate.into(),
            p.satellite_rate_se.into(),
            p.upper_above_zeropoint.into(),
            p.upper_above_zeropoint_se.into(),
            p.eq1_ratio.into(),
            p.eq1_ratio_se.into(),
            p.eq2_ratio.into(),
            Cell::Int(p.theta_d_ext.is_some() as u64),
        ]);
    }
    Ok((rainbow, table))
}

/// Report of the conjugate-channel ratios at one frequency.
///
/// Rows: `eq1_ratio`, `photon_theory_ratio` (always 1), `cosine_prediction`,
/// `eq2_ratio`, `eq2_cosine_prediction`, `upper_above_zeropoint`,
/// `upper_photon_rate`, `theta_low_ext`, `theta_high_ext`.
pub fn cmd_ratios(cfg: &RunConfig, omega: Option<f64>) -> Result<Table, CliError> {
    let mut cfg = cfg.clone();
    if let Some(w) = omega {
        cfg.ratios.omega = w;
    }
    cfg.validate()?;
    let w = cfg.ratios.omega;
    let mut table = Table::new(&["quantity", "value", "std_error"], &cfg.fingerprint());
    let mut row = |name: &str, v: Option<f64>, se: Option<f64>| {
        table.push(vec![name.into(), v.into(), se.into()]);
    };

    if let Some([lo_deg, hi_deg]) = cfg.ratios.force_angles_deg {
        // bare squeezer with the two angles imposed
        let couplings = cfg.couplings.resolve(&cfg.crystal);
        let (tl, th) = (lo_deg.to_radians(), hi_deg.to_radians());
        let low = Mode::free(w, tl, Polarization::Ordinary, Role::Input)?;
        let high = Mode::free(1.0 - w, -th, Polarization::Ordinary, Role::Idler)?;
        let t = squeeze_pair(couplings.g_down * cfg.crystal.length_mm, couplings.phi_down);
        let (ratio, se) = match cfg.engine {
            Engine::Covariance => {
                let state =
                    propagate_covariance(&t, &vacuum_state(2)?.with_modes(vec![low, high])?)?;
                let r = ratio_down(&channel_rate(&state, &low)?, &channel_rate(&state, &high)?)?;
                (r, 0.0)
            }
            Engine::MonteCarlo => {
                let m = monte_carlo_moments(&t, &[low, high], cfg.trials, cfg.seed)?;
                ratio_down_with_error(&m, &low, &high)?
            }
        };
        row("eq1_ratio", Some(ratio), Some(se));
        row("photon_theory_ratio", Some(1.0), None);
        row("cosine_prediction", Some(th.cos() / tl.cos()), None);
        row("eq2_ratio", None, None);
        row("eq2_cosine_prediction", None, None);
        row("upper_above_zeropoint", None, None);
        row("upper_photon_rate", None, None);
        row("theta_low_ext", Some(tl), None);
        row("theta_high_ext", Some(th), None);
        return Ok(table);
    }

    let req = sweep_request(&cfg);
    let p = evaluate_point(&req, 0, w)?;
    let conj = main_system(1.0 - w, &cfg.crystal, &req.couplings).ok();
    let sat = satellite_system(w, &cfg.crystal, &req.couplings).ok();
    let cos_pred = match (p.theta_d_ext, &conj) {
        (Some(a), Some(c)) => Some(c.solution.theta_in_external.cos() / a.cos()),
        _ => None,
    };
    let upper_theta = sat.as_ref().map(|s| s.solution.theta_out_external);
    let eq2_pred = match (upper_theta, p.theta_u_ext) {
        (Some(tc), Some(ta)) => Some(-tc.cos() / ta.cos()),
        _ => None,
    };
    let upper_rate = match (p.upper_above_zeropoint, upper_theta) {
        (Some(v), Some(tc)) => Some(v.max(0.0) / tc.cos()),
        _ => None,
    };
    if p.theta_d_ext.is_none() {
        return Err(Error::NoSolution(format!("no down-conversion match at omega = {w}")).into());
    }
    row("eq1_ratio", p.eq1_ratio, p.eq1_ratio_se);
    row("photon_theory_ratio", Some(1.0), None);
    row("cosine_prediction", cos_pred, None);
    row("eq2_ratio", p.eq2_ratio, None);
    row("eq2_cosine_prediction", eq2_pred, None);
    row("upper_above_zeropoint", p.upper_above_zeropoint, p.upper_above_zeropoint_se);
    row("upper_photon_rate", upper_rate, None);
    row("theta_low_ext", p.theta_d_ext, None);
    row(
        "theta_high_ext",
        conj.map(|c| c.solution.theta_in_external),
        None,
    );
    Ok(table)
}

pub const DARKRATE_COLUMNS: [&str; 5] =
    ["window_samples", "windows", "clicks", "probability", "std_error"];

/// Vacuum click probability against window length; `trials` is the number
/// of windows per entry.
pub fn cmd_darkrate(cfg: &RunConfig, windows: Option<Vec<usize>>) -> Result<Table, CliError> {
    let mut cfg = cfg.clone();
    if let Some(w) = windows {
        cfg.darkrate.windows = w;
    }
    cfg.validate()?;
    let curve = dark_rate_curve(&cfg.detector, &cfg.darkrate.windows, cfg.trials, cfg.seed)?;
    let mut table = Table::new(&DARKRATE_COLUMNS, &cfg.fingerprint());
    for p in curve {
        table.push(vec![
            p.window_samples.into(),
            p.windows.into(),
            p.clicks.into(),
            p.probability.into(),
            p.std_error.into(),
        ]);
    }
    Ok(table)
}

/// Raw output amplitudes of one three-wave system, one row per trial.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.validate()?;
    let couplings = cfg.couplings.resolve(&cfg.crystal);
    let w = cfg.simulate.omega;
    let cs = match cfg.simulate.system {
        SystemKind::Main => main_system(w, &cfg.crystal, &couplings)?,
        SystemKind::Satellite => satellite_system(w, &cfg.crystal, &couplings)?,
    };
    let t = integrate_three_wave(&cs.system)?;
    let modes = cs.system.modes.to_vec();
    let out = apply(&t, &sample_vacuum(&modes, cfg.trials, cfg.seed)?)?;
    let names = ["input", "idler", "signal"];
    let mut columns = vec!["trial".to_string()];
    for n in names {
        columns.push(format!("{n}_re"));
        columns.push(format!("{n}_im"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols, &cfg.fingerprint());
    for trial in 0..out.n_trials {
        let mut row: Vec<Cell> = vec![trial.into()];
        for a in out.trial(trial) {
            row.push(a.re.into());
            row.push(a.im.into());
        }
        table.push(row);
    }
    Ok(table)
}
