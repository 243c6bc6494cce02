//! Frequency sweeps producing the main down-conversion rainbow and the
//! up-conversion satellite.
//!
//! Every sampled channel is evaluated inside its own three-wave system: the
//! channel at `omega`, its down-conversion partner at `1 - omega` and its
//! up-conversion partner at `1 + omega`, all sharing the channel's transverse
//! wavevector. On the main rainbow the down-conversion partner is matched and
//! up-conversion runs mismatched; on the satellite it is the other way round,
//! so whatever the satellite shows is mismatched pair creation reshaped by the
//! competing passive process.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{integrate_three_wave, propagate_covariance, ThreeWaveSystem};
use crate::detection::{
    channel_rate, monte_carlo_moments, ratio_up, ChannelRate, DetectorSpec, IntensitySource,
};
use crate::dispersion::{
    angle_for_transverse, match_down, match_up, mode_at, pump_mode, wavevector, CrystalSpec,
    PhaseMatchSolution,
};
use crate::error::{Error, Result};
use crate::zpf::{vacuum_state, Mode, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Covariance,
    MonteCarlo,
}

/// Coupling strengths per mm and pump phases of both processes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    pub g_down: f64,
    pub g_up: f64,
    pub phi_down: f64,
    pub phi_up: f64,
}

impl Couplings {
    /// Both processes at the crystal gain, phases zero.
    pub fn from_crystal(crystal: &CrystalSpec) -> Self {
        Couplings {
            g_down: crystal.gain_per_mm,
            g_up: crystal.gain_per_mm,
            phi_down: 0.0,
            phi_up: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("couplings.g_down", self.g_down), ("couplings.g_up", self.g_up)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        for (name, p) in [("couplings.phi_down", self.phi_down), ("couplings.phi_up", self.phi_up)] {
            if !p.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        Ok(())
    }
}

/// One sampled frequency. `None` marks a quantity with no converged geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainbowPoint {
    pub omega: f64,
    pub theta_d_ext: Option<f64>,
    pub theta_u_ext: Option<f64>,
    pub main_rate: Option<f64>,
    pub main_rate_se: Option<f64>,
    pub conjugate_rate: Option<f64>,
    pub conjugate_rate_se: Option<f64>,
    pub satellite_rate: Option<f64>,
    pub satellite_rate_se: Option<f64>,
    /// Signed, unclamped value at `1 + omega` on the satellite.
    pub upper_above_zeropoint: Option<f64>,
    pub upper_above_zeropoint_se: Option<f64>,
    pub eq1_ratio: Option<f64>,
    pub eq1_ratio_se: Option<f64>,
    pub eq2_ratio: Option<f64>,
}

impl RainbowPoint {
    fn absent(omega: f64) -> Self {
        RainbowPoint {
            omega,
            theta_d_ext: None,
            theta_u_ext: None,
            main_rate: None,
            main_rate_se: None,
            conjugate_rate: None,
            conjugate_rate_se: None,
            satellite_rate: None,
            satellite_rate_se: None,
            upper_above_zeropoint: None,
            upper_above_zeropoint_se: None,
            eq1_ratio: None,
            eq1_ratio_se: None,
            eq2_ratio: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainbowTable {
    pub points: Vec<RainbowPoint>,
    pub config_fingerprint: String,
}

/// Everything a sweep depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRequest {
    pub omega_min: f64,
    pub omega_max: f64,
    pub steps: usize,
    pub crystal: CrystalSpec,
    pub detector: DetectorSpec,
    pub couplings: Couplings,
    pub engine: Engine,
    pub trials: usize,
    pub seed: u64,
    /// Zero both mismatches in the satellite system, to check that the
    /// satellite suppression comes from phase mismatch alone.
    pub zero_satellite_mismatch: bool,
}

/// A three-wave system built around channel `omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSystem {
    pub system: ThreeWaveSystem,
    pub solution: PhaseMatchSolution,
}

/// Main-rainbow system: `omega` and `1 - omega` matched, `1 + omega` on the
/// channel's transverse wavevector.
pub fn main_system(omega: f64, crystal: &CrystalSpec, couplings: &Couplings) -> Result<ChannelSystem> {
    let sol = match_down(omega, crystal)?;
    let a = sol.input_mode(crystal);
    let b = sol.output_mode(crystal);
    let (kt, _) = wavevector(&a, crystal)?;
    let theta_c = angle_for_transverse(1.0 + omega, crystal.up_polarization, kt, crystal)?;
    let c = mode_at(1.0 + omega, crystal.up_polarization, theta_c, Role::Signal, crystal)?;
    let b = Mode { role: Role::Idler, ..b };
    let system = assemble([a, b, c], crystal, couplings)?;
    Ok(ChannelSystem { system, solution: sol })
}

/// Satellite system: `omega` and `1 + omega` matched, `1 - omega` mirrored
/// onto the other side of the pump.
pub fn satellite_system(
    omega: f64,
    crystal: &CrystalSpec,
    couplings: &Couplings,
) -> Result<ChannelSystem> {
    let sol = match_up(omega, crystal)?;
    let a = sol.input_mode(crystal);
    let c = sol.output_mode(crystal);
    let (kt, _) = wavevector(&a, crystal)?;
    let theta_b = angle_for_transverse(1.0 - omega, crystal.down_polarization, -kt, crystal)?;
    let b = mode_at(1.0 - omega, crystal.down_polarization, theta_b, Role::Idler, crystal)?;
    let system = assemble([a, b, c], crystal, couplings)?;
    Ok(ChannelSystem { system, solution: sol })
}

fn assemble(modes: [Mode; 3], crystal: &CrystalSpec, couplings: &Couplings) -> Result<ThreeWaveSystem> {
    let [a, b, c] = modes;
    let (_, kp) = wavevector(&pump_mode(crystal), crystal)?;
    let (_, ka) = wavevector(&a, crystal)?;
    let (_, kb) = wavevector(&b, crystal)?;
    let (_, kc) = wavevector(&c, crystal)?;
    Ok(ThreeWaveSystem {
        modes,
        g_down: couplings.g_down,
        g_up: couplings.g_up,
        phi_down: couplings.phi_down,
        phi_up: couplings.phi_up,
        dk_down: kp - ka - kb,
        dk_up: kc - kp - ka,
        length_mm: crystal.length_mm,
        steps: 0,
    }
    .with_recommended_steps())
}

/// Rates of all three channels of `system`, by the chosen engine.
pub fn evaluate_system(
    system: &ThreeWaveSystem,
    engine: Engine,
    trials: usize,
    seed: u64,
) -> Result<[ChannelRate; 3]> {
    let t = integrate_three_wave(system)?;
    let modes = system.modes.to_vec();
    let rates = |src: &dyn IntensitySource| -> Result<[ChannelRate; 3]> {
        Ok([
            channel_rate(src, &modes[0])?,
            channel_rate(src, &modes[1])?,
            channel_rate(src, &modes[2])?,
        ])
    };
    match engine {
        Engine::Covariance => {
            let state = propagate_covariance(&t, &vacuum_state(3)?.with_modes(modes.clone())?)?;
            rates(&state)
        }
        Engine::MonteCarlo => rates(&monte_carlo_moments(&t, &modes, trials, seed)?),
    }
}

/// Uniform grid of `steps` points on `[omega_min, omega_max]`.
pub fn omega_grid(omega_min: f64, omega_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(omega_min > 0.0 && omega_min < omega_max && omega_max < 1.0) {
        return Err(Error::config(
            "sweep",
            format!("need 0 < omega_min < omega_max < 1, got [{omega_min}, {omega_max}]"),
        ));
    }
    if steps < 2 {
        return Err(Error::config("sweep.steps", "must be >= 2"));
    }
    let span = omega_max - omega_min;
    Ok((0..steps)
        .map(|i| {
            if i == steps - 1 {
                omega_max
            } else {
                omega_min + span * i as f64 / (steps - 1) as f64
            }
        })
        .collect())
}

/// Independent seed for sub-run `k` of point `index`.
fn point_seed(seed: u64, index: usize, k: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ ((index as u64) << 2 | k).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Geometry failures mark a quantity absent; anything else is a real error.
fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoSolution(_)) | Err(Error::Domain { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluate one frequency; `index` only feeds the per-point seed.
pub fn evaluate_point(req: &SweepRequest, index: usize, omega: f64) -> Result<RainbowPoint> {
    let mut p = RainbowPoint::absent(omega);
    let seed = |k| point_seed(req.seed, index, k);

    if let Some(main) = optional(main_system(omega, &req.crystal, &req.couplings))? {
        let [a, _, _] = evaluate_system(&main.system, req.engine, req.trials, seed(0))?;
        p.theta_d_ext = Some(main.solution.theta_in_external);
        p.main_rate = Some(a.photon_rate);
        p.main_rate_se = Some(a.rate_std_error());
    }
    if let Some(conj) = optional(main_system(1.0 - omega, &req.crystal, &req.couplings))? {
        let [a, _, _] = evaluate_system(&conj.system, req.engine, req.trials, seed(1))?;
        p.conjugate_rate = Some(a.photon_rate);
        p.conjugate_rate_se = Some(a.rate_std_error());
    }
    if let (Some(m), Some(c)) = (p.main_rate, p.conjugate_rate) {
        if m > 0.0 && c > 0.0 {
            let r = m / c;
            let (sm, sc) = (p.main_rate_se.unwrap_or(0.0), p.conjugate_rate_se.unwrap_or(0.0));
            p.eq1_ratio = Some(r);
            p.eq1_ratio_se = Some(r * ((sm / m).powi(2) + (sc / c).powi(2)).sqrt());
        }
    }

    if let Some(sat) = optional(satellite_system(omega, &req.crystal, &req.couplings))? {
        p.theta_u_ext = Some(sat.solution.theta_in_external);
        if req.couplings.g_up > 0.0 {
            let mut system = sat.system;
            if req.zero_satellite_mismatch {
                system.dk_down = 0.0;
                system.dk_up = 0.0;
                system = system.with_recommended_steps();
            }
            let [a, _, c] = evaluate_system(&system, req.engine, req.trials, seed(2))?;
            p.satellite_rate = Some(a.photon_rate);
            p.satellite_rate_se = Some(a.rate_std_error());
            p.upper_above_zeropoint = Some(c.above_zeropoint);
            p.upper_above_zeropoint_se = Some(c.std_error);
            p.eq2_ratio = match ratio_up(&a, c.above_zeropoint, c.mode.theta_external) {
                Ok(r) => Some(r),
                Err(Error::UndefinedRatio(_)) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(p)
}

/// Sweep the band and evaluate both rainbows at every grid point.
pub fn sweep(req: &SweepRequest) -> Result<RainbowTable> {
    req.crystal.validate()?;
    req.detector.validate()?;
    req.couplings.validate()?;
    if req.engine == Engine::MonteCarlo && req.trials < 2 {
        return Err(Error::config("trials", "Monte Carlo needs at least 2 trials"));
    }
    let grid = omega_grid(req.omega_min, req.omega_max, req.steps)?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, &w)| evaluate_point(req, i, w))
        .collect::<Result<Vec<_>>>()?;
    if points.iter().all(|p| p.theta_d_ext.is_none()) {
        return Err(Error::Band(format!(
            "no down-conversion match anywhere in [{}, {}] ({} points)",
            req.omega_min, req.omega_max, req.steps
        )));
    }
    Ok(RainbowTable {
        points,
        config_fingerprint: String::new(),
    })
}

/// Band averages of satellite/main rate and of `theta_u / theta_d`.
pub fn satellite_summary(table: &RainbowTable) -> Result<(f64, f64)> {
    let mut rate = 0.0;
    let mut angle = 0.0;
    let mut n = 0usize;
    for p in &table.points {
        if let (Some(s), Some(m), Some(tu), Some(td)) =
            (p.satellite_rate, p.main_rate, p.theta_u_ext, p.theta_d_ext)
        {
            if m > 0.0 && td != 0.0 {
                rate += s / m;
                angle += tu / td;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NotPresent(
            "no sampled frequency carries both rainbows".into(),
        ));
    }
    Ok((rate / n as f64, angle / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::test_crystals::{flat, model};

    fn request(engine: Engine) -> SweepRequest {
        let crystal = model();
        SweepRequest {
            omega_min: 0.4,
            omega_max: 0.6,
            steps: 5,
            couplings: Couplings::from_crystal(&crystal),
            crystal,
            detector: DetectorSpec::default(),
            engine,
            trials: 200_000,
            seed: 3,
            zero_satellite_mismatch: false,
        }
    }

    #[test]
    fn grid_is_uniform_and_validated() {
        let g = omega_grid(0.4, 0.6, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2] - 0.5).abs() < 1e-15);
        assert_eq!(g[4], 0.6);
        assert!(omega_grid(0.6, 0.4, 5).is_err());
        assert!(omega_grid(0.0, 0.4, 5).is_err());
        assert!(omega_grid(0.4, 0.6, 1).is_err());
    }

    #[test]
    fn main_system_is_down_matched() {
        let crystal = model();
        let cs = main_system(0.45, &crystal, &Couplings::from_crystal(&crystal)).unwrap();
        assert!(cs.system.dk_down.abs() < 1e-9);
        assert!(cs.system.dk_up.abs() > 1e-3);
        let sat = satellite_system(0.45, &crystal, &Couplings::from_crystal(&crystal)).unwrap();
        assert!(sat.system.dk_up.abs() < 1e-9);
        assert!(sat.system.dk_down.abs() > 1e-3);
    }

    #[test]
    fn symmetric_band() {
        let table = sweep(&request(Engine::Covariance)).unwrap();
        let pts = &table.points;
        assert_eq!(pts.len(), 5);
        assert!(pts.windows(2).all(|w| w[0].omega < w[1].omega));
        assert!((pts[2].eq1_ratio.unwrap() - 1.0).abs() < 1e-12);
        for i in 0..5 {
            let r = pts[i].eq1_ratio.unwrap() * pts[4 - i].eq1_ratio.unwrap();
            assert!((r - 1.0).abs() < 1e-9);
        }
        // lower frequencies sit at larger angles and carry higher rates
        assert!(pts[0].eq1_ratio.unwrap() > 1.0);
    }

    #[test]
    fn reproducible() {
        let a = sweep(&request(Engine::Covariance)).unwrap();
        let b = sweep(&request(Engine::Covariance)).unwrap();
        assert_eq!(a, b);
        let mut req = request(Engine::MonteCarlo);
        req.steps = 2;
        req.trials = 20_000;
        assert_eq!(sweep(&req).unwrap(), sweep(&req).unwrap());
    }

    #[test]
    fn no_satellite_without_up_coupling() {
        let mut req = request(Engine::Covariance);
        req.couplings.g_up = 0.0;
        let table = sweep(&req).unwrap();
        assert!(table.points.iter().all(|p| p.satellite_rate.is_none()));
        assert!(matches!(satellite_summary(&table), Err(Error::NotPresent(_))));
    }

    #[test]
    fn unmatched_band_is_an_error() {
        let mut req = request(Engine::Covariance);
        req.crystal = flat();
        req.crystal.sellmeier_e = crate::dispersion::SellmeierCoefficients::new(vec![(0.2, 0.01)]);
        req.crystal.optic_axis_deg = 90.0;
        match sweep(&req) {
            Err(Error::Band(_)) => {}
            other => panic!("expected band error, got {other:?}"),
        }
    }
}
