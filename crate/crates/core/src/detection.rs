//! Threshold detectors looking at a field that always carries the zeropoint.
//!
//! Mean rates subtract the vacuum level 1/2 and convert intensity to photon
//! flux through the detector plane with a `1/cos(theta)` factor. Click
//! statistics compare a window-averaged intensity with the threshold; a long
//! window is what keeps vacuum fluctuations from firing the detector. This
//! window-averaging model is a stand-in, not a measured detector response.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{apply, BogoliubovTransform};
use crate::error::{Error, Result};
use crate::zpf::{
    sample_vacuum_range, GaussianState, Mode, Polarization, Role,
    VacuumEnsemble, VacuumStream,
};

/// Mean zeropoint intensity of any mode.
pub const ZEROPOINT: f64 = 0.5;

/// Keystream reserved for efficiency thinning, far away from mode streams.
const THINNING_STREAM: u64 = 1 << 63;

/// Windows evaluated per work item by [`dark_rate_curve`].
const WINDOW_BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub threshold: f64,
    pub window_samples: usize,
    pub efficiency: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            threshold: ZEROPOINT,
            window_samples: 1,
            efficiency: 1.0,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::config("detector.threshold", "must be finite and >= 0"));
        }
        if self.window_samples == 0 {
            return Err(Error::config("detector.window_samples", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config("detector.efficiency", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Mean detection figures of one output channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRate {
    pub mode: Mode,
    pub mean_intensity: f64,
    /// `mean_intensity - 1/2`; negative when the channel sits below the vacuum level.
    pub above_zeropoint: f64,
    /// Clamped at zero.
    pub photon_rate: f64,
    pub detected: bool,
    /// Standard error of `mean_intensity`; zero for exact states.
    pub std_error: f64,
}

impl ChannelRate {
    pub fn from_mean(mode: Mode, mean_intensity: f64, std_error: f64) -> Self {
        let above = mean_intensity - ZEROPOINT;
        ChannelRate {
            mode,
            mean_intensity,
            above_zeropoint: above,
            photon_rate: above.max(0.0) / mode.theta_external.cos(),
            detected: above > 0.0,
            std_error,
        }
    }

    /// Unclamped flux `above_zeropoint / cos(theta)`.
    pub fn signed_rate(&self) -> f64 {
        self.above_zeropoint / self.mode.theta_external.cos()
    }

    pub fn rate_std_error(&self) -> f64 {
        self.std_error / self.mode.theta_external.cos()
    }
}

/// Anything that can report the mean intensity of a mode.
pub trait IntensitySource {
    /// Mean `|a|^2` and its standard error.
    fn intensity(&self, mode: &Mode) -> Result<(f64, f64)>;
}

impl IntensitySource for VacuumEnsemble {
    fn intensity(&self, mode: &Mode) -> Result<(f64, f64)> {
        self.intensity_stats(mode)
    }
}

impl IntensitySource for GaussianState {
    fn intensity(&self, mode: &Mode) -> Result<(f64, f64)> {
        Ok((self.mean_intensity(mode)?, 0.0))
    }
}

impl IntensitySource for IntensityMoments {
    fn intensity(&self, mode: &Mode) -> Result<(f64, f64)> {
        let j = crate::zpf::find_mode(&self.modes, mode)?;
        Ok((self.mean(j), self.covariance_of_means(j, j).sqrt()))
    }
}

pub fn channel_rate<S: IntensitySource + ?Sized>(source: &S, mode: &Mode) -> Result<ChannelRate> {
    let (mean, se) = source.intensity(mode)?;
    Ok(ChannelRate::from_mean(*mode, mean, se))
}

/// Photon-rate ratio of a conjugate down-conversion pair `(omega, 1 - omega)`.
pub fn ratio_down(rate_low: &ChannelRate, rate_high: &ChannelRate) -> Result<f64> {
    for (name, r) in [("lower", rate_low), ("upper", rate_high)] {
        if !r.detected {
            return Err(Error::UndefinedRatio(format!(
                "{name} channel at omega = {} is not above the zeropoint",
                r.mode.omega
            )));
        }
    }
    Ok(rate_low.photon_rate / rate_high.photon_rate)
}

/// Signed rate ratio of a conjugate up-conversion pair `(omega, 1 + omega)`.
///
/// The upper channel enters through its raw above-zeropoint value so a
/// below-vacuum channel shows up as a negative ratio.
pub fn ratio_up(
    rate_low: &ChannelRate,
    upper_above_zeropoint: f64,
    theta_upper_external: f64,
) -> Result<f64> {
    let denom = upper_above_zeropoint / theta_upper_external.cos();
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::UndefinedRatio(
            "upper channel sits exactly at the zeropoint".into(),
        ));
    }
    Ok(rate_low.signed_rate() / denom)
}

/// Running first and second moments of per-trial intensities, including
/// cross terms, so ratios can carry delta-method errors.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMoments {
    pub modes: Vec<Mode>,
    pub n: usize,
    sum: Vec<f64>,
    cross: DMatrix<f64>,
}

impl IntensityMoments {
    pub fn new(modes: &[Mode]) -> Self {
        let m = modes.len();
        IntensityMoments {
            modes: modes.to_vec(),
            n: 0,
            sum: vec![0.0; m],
            cross: DMatrix::zeros(m, m),
        }
    }

    pub fn from_ensemble(ensemble: &VacuumEnsemble) -> Self {
        let mut acc = IntensityMoments::new(&ensemble.modes);
        acc.add(ensemble);
        acc
    }

    /// Fold in every trial of `ensemble`; modes must match.
    pub fn add(&mut self, ensemble: &VacuumEnsemble) {
        assert_eq!(ensemble.modes, self.modes, "ensemble modes differ from accumulator");
        let m = self.modes.len();
        let mut row = vec![0.0; m];
        for t in 0..ensemble.n_trials {
            for (slot, a) in row.iter_mut().zip(ensemble.trial(t)) {
                *slot = a.norm_sqr();
            }
            for r in 0..m {
                self.sum[r] += row[r];
                for c in r..m {
                    self.cross[(r, c)] += row[r] * row[c];
                }
            }
        }
        self.n += ensemble.n_trials;
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.sum[j] / self.n as f64
    }

    /// Covariance of the sample means of modes `i` and `j`.
    pub fn covariance_of_means(&self, i: usize, j: usize) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return f64::INFINITY;
        }
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let cov = (self.cross[(r, c)] - self.sum[r] * self.sum[c] / n) / (n - 1.0);
        cov / n
    }
}

/// Trials per streamed chunk in [`monte_carlo_moments`]. Fixed, so results
/// never depend on memory or thread settings.
const STREAM_CHUNK: usize = 1 << 18;

/// Intensity moments of `n_trials` vacuum trials pushed through `t`, generated
/// and folded in fixed-size chunks so memory stays bounded. Identical to
/// accumulating `apply(t, &sample_vacuum(modes, n_trials, seed))` in one go.
pub fn monte_carlo_moments(
    t: &BogoliubovTransform,
    modes: &[Mode],
    n_trials: usize,
    seed: u64,
) -> Result<IntensityMoments> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    let mut acc = IntensityMoments::new(modes);
    let mut first = 0usize;
    while first < n_trials {
        let n = STREAM_CHUNK.min(n_trials - first);
        let vac = sample_vacuum_range(modes, first as u64, n, seed)?;
        acc.add(&apply(t, &vac)?);
        first += n;
    }
    Ok(acc)
}

/// Down-conversion ratio with a delta-method standard error that accounts
/// for the trial-by-trial correlation of conjugate channels.
pub fn ratio_down_with_error(
    moments: &IntensityMoments,
    low: &Mode,
    high: &Mode,
) -> Result<(f64, f64)> {
    let i = crate::zpf::find_mode(&moments.modes, low)?;
    let j = crate::zpf::find_mode(&moments.modes, high)?;
    let rl = channel_rate(moments, low)?;
    let rh = channel_rate(moments, high)?;
    let ratio = ratio_down(&rl, &rh)?;
    let (cl, ch) = (low.theta_external.cos(), high.theta_external.cos());
    let x = rl.above_zeropoint / cl;
    let y = rh.above_zeropoint / ch;
    let vx = moments.covariance_of_means(i, i) / (cl * cl);
    let vy = moments.covariance_of_means(j, j) / (ch * ch);
    let cxy = moments.covariance_of_means(i, j) / (cl * ch);
    let var = vx / (y * y) - 2.0 * x * cxy / y.powi(3) + x * x * vy / y.powi(4);
    Ok((ratio, var.max(0.0).sqrt()))
}

/// Window-averaged threshold clicks on one mode: `(clicks, windows)`.
///
/// Consecutive trials form windows of `window_samples`; a trailing partial
/// window is dropped. Efficiency thins clicks with an independent keystream
/// indexed by window, so results do not depend on scheduling.
pub fn threshold_counts(
    ensemble: &VacuumEnsemble,
    mode: &Mode,
    spec: &DetectorSpec,
    rng_seed: u64,
) -> Result<(u64, u64)> {
    spec.validate()?;
    let idx = ensemble.mode_index(mode)?;
    let m = spec.window_samples;
    if ensemble.n_trials < m {
        return Err(Error::InvalidArgument(format!(
            "{} trials cannot fill one window of {m} samples",
            ensemble.n_trials
        )));
    }
    let intensities: Vec<f64> = ensemble.intensities(idx).collect();
    let windows = ensemble.n_trials / m;
    let clicks = count_windows(&intensities[..windows * m], 0, spec, rng_seed);
    Ok((clicks, windows as u64))
}

/// Clicks among the windows stored in `intensities`, whose first window has
/// global index `first_window`.
fn count_windows(intensities: &[f64], first_window: u64, spec: &DetectorSpec, seed: u64) -> u64 {
    let m = spec.window_samples;
    let mut clicks = 0;
    for (w, window) in intensities.chunks_exact(m).enumerate() {
        let avg = window.iter().sum::<f64>() / m as f64;
        if avg > spec.threshold && keep(first_window + w as u64, spec.efficiency, seed) {
            clicks += 1;
        }
    }
    clicks
}

fn keep(window: u64, efficiency: f64, seed: u64) -> bool {
    if efficiency >= 1.0 {
        return true;
    }
    if efficiency <= 0.0 {
        return false;
    }
    VacuumStream::new(seed, THINNING_STREAM, window as u128).uniform() < efficiency
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkRatePoint {
    pub window_samples: usize,
    pub windows: u64,
    pub clicks: u64,
    pub probability: f64,
    pub std_error: f64,
}

/// Vacuum click probability for each window length in `window_list`, each
/// estimated from `windows` windows.
///
/// Every entry reads the same vacuum keystream, so the `M = 1` entry equals
/// [`threshold_counts`] on `sample_vacuum(&[dark_mode()], windows, seed)`.
pub fn dark_rate_curve(
    spec_base: &DetectorSpec,
    window_list: &[usize],
    windows: usize,
    seed: u64,
) -> Result<Vec<DarkRatePoint>> {
    spec_base.validate()?;
    if spec_base.threshold <= ZEROPOINT {
        return Err(Error::config(
            "detector.threshold",
            format!(
                "dark-rate curve needs a threshold above the zeropoint mean {ZEROPOINT}, got {}",
                spec_base.threshold
            ),
        ));
    }
    if windows == 0 {
        return Err(Error::InvalidArgument("need at least one window".into()));
    }
    if window_list.is_empty() || window_list.contains(&0) {
        return Err(Error::config("darkrate.windows", "window sizes must be >= 1"));
    }
    let mode = dark_mode();
    window_list
        .iter()
        .map(|&m| {
            let spec = DetectorSpec {
                window_samples: m,
                ..*spec_base
            };
            let n_blocks = windows.div_ceil(WINDOW_BLOCK);
            let clicks = (0..n_blocks)
                .into_par_iter()
                .map(|b| -> Result<u64> {
                    let w0 = b * WINDOW_BLOCK;
                    let nw = WINDOW_BLOCK.min(windows - w0);
                    let ens =
                        sample_vacuum_range(&[mode], (w0 * m) as u64, nw * m, seed)?;
                    let values: Vec<f64> = ens.intensities(0).collect();
                    Ok(count_windows(&values, w0 as u64, &spec, seed))
                })
                .collect::<Result<Vec<u64>>>()?
                .into_iter()
                .sum::<u64>();
            let p = clicks as f64 / windows as f64;
            let se = binomial_std_error(clicks, windows as u64);
            Ok(DarkRatePoint {
                window_samples: m,
                windows: windows as u64,
                clicks,
                probability: p,
                std_error: se,
            })
        })
        .collect()
}

/// The detector mode sampled by [`dark_rate_curve`].
pub fn dark_mode() -> Mode {
    Mode::free(0.5, 0.0, Polarization::Ordinary, Role::Input).expect("valid mode")
}

/// Binomial standard error of a click fraction.
fn binomial_std_error(successes: u64, n: u64) -> f64 {
    let p = successes as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{propagate_covariance, squeeze_pair};
    use crate::zpf::{sample_vacuum, vacuum_state};

    fn mode_at(theta_deg: f64) -> Mode {
        Mode::free(0.4, theta_deg.to_radians(), Polarization::Ordinary, Role::Signal).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(DetectorSpec::default().validate().is_ok());
        let bad = [
            DetectorSpec { threshold: -0.1, ..Default::default() },
            DetectorSpec { window_samples: 0, ..Default::default() },
            DetectorSpec { efficiency: 1.5, ..Default::default() },
        ];
        for b in bad {
            assert!(matches!(b.validate(), Err(Error::InvalidConfig { .. })));
        }
    }

    #[test]
    fn vacuum_is_not_detected() {
        let modes = [mode_at(5.0), mode_at(30.0)];
        let state = vacuum_state(2).unwrap().with_modes(modes.to_vec()).unwrap();
        for m in &modes {
            let r = channel_rate(&state, m).unwrap();
            assert_eq!(r.above_zeropoint, 0.0);
            assert_eq!(r.photon_rate, 0.0);
            assert!(!r.detected);
        }
    }

    #[test]
    fn cosine_flux_and_clamping() {
        let s = 0.1f64.sinh().powi(2);
        let r = ChannelRate::from_mean(mode_at(10.0), 0.5 + s, 0.0);
        assert!((r.photon_rate - s / 10f64.to_radians().cos()).abs() < 1e-15);
        assert!((r.photon_rate - 0.0101882).abs() < 1e-6);

        let low = ChannelRate::from_mean(mode_at(10.0), 0.49, 0.0);
        assert_eq!(low.photon_rate, 0.0);
        assert!(!low.detected);
        assert!(low.signed_rate() < 0.0);
    }

    #[test]
    fn channel_rate_from_both_sources() {
        let modes = vec![mode_at(3.0), mode_at(-4.0)];
        let t = squeeze_pair(0.1, 0.0);
        let exact = propagate_covariance(&t, &vacuum_state(2).unwrap().with_modes(modes.clone()).unwrap())
            .unwrap();
        let mc = apply(&t, &sample_vacuum(&modes, 200_000, 2).unwrap()).unwrap();
        for m in &modes {
            let a = channel_rate(&exact, m).unwrap();
            let b = channel_rate(&mc, m).unwrap();
            assert_eq!(a.std_error, 0.0);
            assert!((a.mean_intensity - b.mean_intensity).abs() < 5.0 * b.std_error);
        }
        let stranger = mode_at(1.0);
        assert!(matches!(channel_rate(&exact, &stranger), Err(Error::NotFound(_))));
        assert!(matches!(channel_rate(&mc, &stranger), Err(Error::NotFound(_))));
    }

    #[test]
    fn down_ratio_is_cosine_ratio() {
        let s = 0.0102;
        let a = ChannelRate::from_mean(mode_at(10.0), 0.5 + s, 0.0);
        let b = ChannelRate::from_mean(mode_at(12.0), 0.5 + s, 0.0);
        let expect = 12f64.to_radians().cos() / 10f64.to_radians().cos();
        assert!((ratio_down(&a, &b).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.993238).abs() < 1e-6);
        assert_eq!(ratio_down(&a, &a).unwrap(), 1.0);
        let dark = ChannelRate::from_mean(mode_at(12.0), 0.5, 0.0);
        assert!(matches!(ratio_down(&a, &dark), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn up_ratio_sign_bookkeeping() {
        let low = ChannelRate::from_mean(mode_at(25.0), 0.51, 0.0);
        let r = ratio_up(&low, -0.004, 10f64.to_radians()).unwrap();
        assert!(r < 0.0);
        let both_flat = ChannelRate::from_mean(mode_at(25.0), 0.5, 0.0);
        assert!(matches!(ratio_up(&both_flat, 0.0, 0.1), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn moments_match_direct_statistics() {
        let modes = vec![mode_at(3.0), mode_at(-4.0)];
        let ens = apply(&squeeze_pair(0.3, 0.0), &sample_vacuum(&modes, 50_000, 4).unwrap()).unwrap();
        let mut acc = IntensityMoments::new(&modes);
        // split accumulation equals one-shot accumulation up to rounding
        let whole = IntensityMoments::from_ensemble(&ens);
        acc.add(&ens);
        assert_eq!(acc, whole);
        let (mean, se) = ens.intensity_stats(&modes[0]).unwrap();
        let (m2, se2) = whole.intensity(&modes[0]).unwrap();
        assert!((mean - m2).abs() < 1e-12);
        assert!((se - se2).abs() / se < 1e-6);
        // Wigner intensities of a squeezed pair: corr(I_a, I_b) = tanh^2(2r)
        let corr = whole.covariance_of_means(0, 1)
            / (whole.covariance_of_means(0, 0) * whole.covariance_of_means(1, 1)).sqrt();
        assert!((corr - 0.6f64.tanh().powi(2)).abs() < 0.03, "{corr}");
    }

    #[test]
    fn streamed_moments_match_one_shot() {
        let modes = vec![mode_at(3.0), mode_at(-4.0)];
        let t = squeeze_pair(0.2, 0.5);
        let n = 300_000; // spans two stream chunks
        let streamed = monte_carlo_moments(&t, &modes, n, 8).unwrap();
        let direct = IntensityMoments::from_ensemble(&apply(&t, &sample_vacuum(&modes, n, 8).unwrap()).unwrap());
        assert_eq!(streamed.n, n);
        for j in 0..2 {
            assert!((streamed.mean(j) - direct.mean(j)).abs() < 1e-13);
        }
    }

    #[test]
    fn click_probability_single_sample() {
        let m = dark_mode();
        let ens = sample_vacuum(&[m], 400_000, 21).unwrap();
        let spec = DetectorSpec { threshold: 0.6, ..Default::default() };
        let (clicks, n) = threshold_counts(&ens, &m, &spec, 21).unwrap();
        let p = clicks as f64 / n as f64;
        let exact = (-1.2f64).exp();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p - exact).abs() < 5.0 * se, "{p} vs {exact}");
    }

    #[test]
    fn efficiency_thinning() {
        let m = dark_mode();
        let ens = sample_vacuum(&[m], 100_000, 1).unwrap();
        let zero = DetectorSpec { threshold: 0.6, efficiency: 0.0, ..Default::default() };
        assert_eq!(threshold_counts(&ens, &m, &zero, 1).unwrap().0, 0);
        let full = DetectorSpec { threshold: 0.6, ..Default::default() };
        let half = DetectorSpec { efficiency: 0.5, ..full };
        let (cf, _) = threshold_counts(&ens, &m, &full, 1).unwrap();
        let (ch, _) = threshold_counts(&ens, &m, &half, 1).unwrap();
        let sd = (cf as f64 * 0.25).sqrt();
        assert!((ch as f64 - 0.5 * cf as f64).abs() < 5.0 * sd);
    }

    #[test]
    fn window_preconditions() {
        let m = dark_mode();
        let ens = sample_vacuum(&[m], 50, 1).unwrap();
        let spec = DetectorSpec { window_samples: 100, threshold: 0.6, ..Default::default() };
        assert!(matches!(threshold_counts(&ens, &m, &spec, 1), Err(Error::InvalidArgument(_))));
        let at_mean = DetectorSpec { threshold: 0.5, ..Default::default() };
        assert!(matches!(
            dark_rate_curve(&at_mean, &[1], 100, 1),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn curve_first_entry_matches_threshold_counts() {
        let spec = DetectorSpec { threshold: 0.6, efficiency: 0.7, ..Default::default() };
        let n = 10_000;
        let curve = dark_rate_curve(&spec, &[1, 10], n, 77).unwrap();
        let ens = sample_vacuum(&[dark_mode()], n, 77).unwrap();
        let (clicks, windows) = threshold_counts(&ens, &dark_mode(), &spec, 77).unwrap();
        assert_eq!((curve[0].clicks, curve[0].windows), (clicks, windows));
        assert!(curve[1].probability < curve[0].probability);
    }
}
