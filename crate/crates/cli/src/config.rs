//! Run configuration: one TOML file with a section per simulation component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zpf_core::detection::DetectorSpec;
use zpf_core::dispersion::CrystalSpec;
use zpf_core::rainbow::{omega_grid, Couplings, Engine};

use crate::CliError;

/// Shipped configuration, also used when no `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    pub trials: usize,
    pub seed: u64,
    pub crystal: CrystalSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub couplings: CouplingsConfig,
    #[serde(default)]
    pub ratios: RatiosConfig,
    #[serde(default)]
    pub darkrate: DarkRateConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// Either `couplings = "auto"` (both processes at the crystal gain, zero
/// phases) or an explicit table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingsConfig {
    Auto(AutoKeyword),
    Explicit(Couplings),
}

impl Default for CouplingsConfig {
    fn default() -> Self {
        CouplingsConfig::Auto(AutoKeyword::Auto)
    }
}

impl CouplingsConfig {
    pub fn resolve(&self, crystal: &CrystalSpec) -> Couplings {
        match self {
            CouplingsConfig::Auto(_) => Couplings::from_crystal(crystal),
            CouplingsConfig::Explicit(c) => *c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatiosConfig {
    pub omega: f64,
    /// Override the matched external angles `(theta(omega), theta(1 - omega))`
    /// in degrees and drive the pair with a bare squeezer.
    pub force_angles_deg: Option<[f64; 2]>,
}

impl Default for RatiosConfig {
    fn default() -> Self {
        RatiosConfig {
            omega: 0.45,
            force_angles_deg: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarkRateConfig {
    pub windows: Vec<usize>,
}

impl Default for DarkRateConfig {
    fn default() -> Self {
        DarkRateConfig {
            windows: vec![1, 10, 100],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Main,
    Satellite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub omega: f64,
    pub system: SystemKind,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            omega: 0.45,
            system: SystemKind::Main,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Core(zpf_core::Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| invalid("config", e.to_string().trim_end().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn default_config() -> Self {
        RunConfig::parse(DEFAULT_CONFIG).expect("shipped config parses")
    }

    /// Re-check every invariant before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.crystal.validate()?;
        self.detector.validate()?;
        self.couplings.resolve(&self.crystal).validate()?;
        omega_grid(self.sweep.omega_min, self.sweep.omega_max, self.sweep.steps)?;
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if self.engine == Engine::MonteCarlo && self.trials < 2 {
            return Err(invalid("trials", "Monte Carlo needs at least 2 trials"));
        }
        if !(self.ratios.omega > 0.0 && self.ratios.omega < 1.0) {
            return Err(invalid("ratios.omega", "must lie in (0, 1)"));
        }
        if let Some(angles) = self.ratios.force_angles_deg {
            if angles.iter().any(|a| !(a.is_finite() && a.abs() < 90.0)) {
                return Err(invalid("ratios.force_angles_deg", "angles must lie in (-90, 90)"));
            }
        }
        if self.darkrate.windows.is_empty() || self.darkrate.windows.contains(&0) {
            return Err(invalid("darkrate.windows", "need a non-empty list of sizes >= 1"));
        }
        if !(self.simulate.omega > 0.0 && self.simulate.omega < 1.0) {
            return Err(invalid("simulate.omega", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the configuration. Where the
    /// result is written is not part of it.
    pub fn fingerprint(&self) -> String {
        let canonical = RunConfig {
            output: OutputConfig::default(),
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_is_valid() {
        let cfg = RunConfig::default_config();
        cfg.validate().unwrap();
        assert_eq!(cfg.couplings, CouplingsConfig::Auto(AutoKeyword::Auto));
    }

    #[test]
    fn unknown_field_is_named() {
        let text = DEFAULT_CONFIG.replace("[detector]", "[detector]\nthreshhold = 0.7");
        match RunConfig::parse(&text) {
            Err(CliError::Core(zpf_core::Error::InvalidConfig { reason, .. })) => {
                assert!(reason.contains("threshhold"), "{reason}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn explicit_couplings() {
        let text = DEFAULT_CONFIG.replace(
            "couplings = \"auto\"",
            "couplings = { g_down = 1.0, g_up = 0.5, phi_down = 0.0, phi_up = 3.0 }",
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.couplings.resolve(&cfg.crystal).g_up, 0.5);
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let mut cfg = RunConfig::default_config();
        cfg.crystal.length_mm = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default_config();
        cfg.detector.efficiency = 2.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default_config();
        cfg.sweep.omega_max = 1.2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = RunConfig::default_config();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.output.path = Some("elsewhere.csv".into());
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
