//! Zeropoint (vacuum) field: plane-wave modes, Monte Carlo vacuum ensembles and
//! exact Gaussian-state bookkeeping.
//!
//! Amplitudes are in zeropoint units: a vacuum mode has mean intensity
//! `<|a|^2> = 1/2`. Quadratures are `x = sqrt(2) Re a`, `p = sqrt(2) Im a`, so the
//! vacuum quadrature covariance is `I/2`.
//!
//! Sampling is counter based. Every `(trial, mode)` pair owns a fixed slice of a
//! ChaCha8 keystream (stream = mode index, word offset = trial index), so the
//! table does not depend on how trials are split across threads.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stochastic amplitude of one field mode in one trial.
pub type ComplexAmplitude = Complex64;

/// Trials generated per work item. Only affects scheduling, never the numbers.
const TRIAL_BLOCK: usize = 4096;

/// Keystream words consumed by one Box-Muller draw (two `u64`).
const WORDS_PER_DRAW: u128 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Signal,
    Idler,
    Pump,
}

/// One plane-wave field mode.
///
/// `omega` is a fraction of the pump frequency. Angles are measured from the
/// pump direction (the exit-face normal); the sign gives the transverse side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega: f64,
    pub theta_external: f64,
    pub theta_internal: f64,
    pub polarization: Polarization,
    pub role: Role,
}

impl Mode {
    pub fn new(
        omega: f64,
        theta_external: f64,
        theta_internal: f64,
        polarization: Polarization,
        role: Role,
    ) -> Result<Self> {
        if !(theta_external.is_finite() && theta_internal.is_finite()) {
            return Err(Error::InvalidArgument("mode angles must be finite".into()));
        }
        match role {
            Role::Pump if omega != 1.0 => {
                return Err(Error::InvalidArgument(format!(
                    "pump mode must have omega = 1, got {omega}"
                )))
            }
            Role::Pump => {}
            _ if !(omega > 0.0 && omega < 2.0) => {
                return Err(Error::InvalidArgument(format!(
                    "mode omega must lie in (0, 2), got {omega}"
                )))
            }
            _ => {}
        }
        Ok(Mode {
            omega,
            theta_external,
            theta_internal,
            polarization,
            role,
        })
    }

    /// A mode outside any medium: internal and external angles coincide.
    pub fn free(omega: f64, theta: f64, polarization: Polarization, role: Role) -> Result<Self> {
        Mode::new(omega, theta, theta, polarization, role)
    }
}

/// Monte Carlo sample of the vacuum (or of a transformed vacuum).
///
/// `amplitudes` is trial-major: entry `t * modes.len() + m` is mode `m` in trial `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct VacuumEnsemble {
    pub n_trials: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub amplitudes: Vec<ComplexAmplitude>,
}

impl VacuumEnsemble {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn trial(&self, t: usize) -> &[ComplexAmplitude] {
        let m = self.modes.len();
        &self.amplitudes[t * m..(t + 1) * m]
    }

    pub fn mode_index(&self, mode: &Mode) -> Result<usize> {
        find_mode(&self.modes, mode)
    }

    /// Per-trial intensity `|a|^2` of the mode at `index`.
    pub fn intensities(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        let m = self.modes.len();
        self.amplitudes
            .iter()
            .skip(index)
            .step_by(m)
            .map(|a| a.norm_sqr())
    }

    /// Sample mean and standard error of `|a|^2` for one mode.
    pub fn intensity_stats(&self, mode: &Mode) -> Result<(f64, f64)> {
        let idx = self.mode_index(mode)?;
        Ok(mean_and_std_error(self.intensities(idx), self.n_trials))
    }

    /// Same ensemble with every amplitude set to zero.
    pub fn zeroed(&self) -> Self {
        VacuumEnsemble {
            amplitudes: vec![Complex64::new(0.0, 0.0); self.amplitudes.len()],
            ..self.clone()
        }
    }

    /// Sample quadrature covariance in `(x_1..x_M, p_1..p_M)` order.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let m = self.modes.len();
        let n = self.n_trials as f64;
        let mut mean = vec![0.0; 2 * m];
        for t in 0..self.n_trials {
            for (j, a) in self.trial(t).iter().enumerate() {
                mean[j] += SQRT_2 * a.re;
                mean[m + j] += SQRT_2 * a.im;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut cov = DMatrix::<f64>::zeros(2 * m, 2 * m);
        let mut q = vec![0.0; 2 * m];
        for t in 0..self.n_trials {
            for (j, a) in self.trial(t).iter().enumerate() {
                q[j] = SQRT_2 * a.re - mean[j];
                q[m + j] = SQRT_2 * a.im - mean[m + j];
            }
            for r in 0..2 * m {
                for c in r..2 * m {
                    cov[(r, c)] += q[r] * q[c];
                }
            }
        }
        for r in 0..2 * m {
            for c in r..2 * m {
                let v = cov[(r, c)] / (n - 1.0);
                cov[(r, c)] = v;
                cov[(c, r)] = v;
            }
        }
        cov
    }
}

pub(crate) fn find_mode(modes: &[Mode], mode: &Mode) -> Result<usize> {
    modes
        .iter()
        .position(|m| m == mode)
        .ok_or_else(|| Error::NotFound(format!("mode {mode:?}")))
}

pub(crate) fn mean_and_std_error(values: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    // Welford keeps the variance accurate when the mean is far from zero.
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        count += 1;
        let d = v - mean;
        mean += d / count as f64;
        m2 += d * (v - mean);
    }
    debug_assert_eq!(count, n);
    if count < 2 {
        return (mean, f64::INFINITY);
    }
    let var = m2 / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

/// Exact Gaussian Wigner state of `M` modes.
///
/// `mean` and `covariance` use the `(x_1..x_M, p_1..p_M)` ordering. `modes` may
/// be empty for anonymous states; lookups by [`Mode`] then fail with not-found.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub modes: Vec<Mode>,
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianState {
    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn with_modes(mut self, modes: Vec<Mode>) -> Result<Self> {
        if modes.len() != self.n_modes() {
            return Err(Error::InvalidArgument(format!(
                "{} modes given for a {}-mode state",
                modes.len(),
                self.n_modes()
            )));
        }
        self.modes = modes;
        Ok(self)
    }

    pub fn mode_index(&self, mode: &Mode) -> Result<usize> {
        find_mode(&self.modes, mode)
    }

    /// Exact `<|a_j|^2>` of mode `j`.
    pub fn mean_intensity_at(&self, j: usize) -> f64 {
        let m = self.n_modes();
        let c = &self.covariance;
        0.5 * (c[(j, j)] + c[(m + j, m + j)] + self.mean[j].powi(2) + self.mean[m + j].powi(2))
    }

    pub fn mean_intensity(&self, mode: &Mode) -> Result<f64> {
        Ok(self.mean_intensity_at(self.mode_index(mode)?))
    }
}

pub fn vacuum_state(n_modes: usize) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("vacuum state needs at least one mode".into()));
    }
    Ok(GaussianState {
        modes: Vec::new(),
        mean: vec![0.0; 2 * n_modes],
        covariance: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5,
    })
}

/// Draw `n_trials` independent vacuum realisations of `modes`.
pub fn sample_vacuum(modes: &[Mode], n_trials: usize, seed: u64) -> Result<VacuumEnsemble> {
    sample_vacuum_range(modes, 0, n_trials, seed)
}

/// Trials `first_trial .. first_trial + n_trials` of the ensemble that
/// [`sample_vacuum`] would draw with the same seed. Lets callers stream very
/// large ensembles in pieces.
pub fn sample_vacuum_range(
    modes: &[Mode],
    first_trial: u64,
    n_trials: usize,
    seed: u64,
) -> Result<VacuumEnsemble> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("mode list is empty".into()));
    }
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    let m = modes.len();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_trials * m];
    amplitudes
        .par_chunks_mut(TRIAL_BLOCK * m)
        .enumerate()
        .for_each(|(block, chunk)| {
            let first = first_trial as u128 + (block * TRIAL_BLOCK) as u128;
            for mode in 0..m {
                let mut stream = VacuumStream::new(seed, mode as u64, first);
                for row in chunk.chunks_exact_mut(m) {
                    row[mode] = stream.next_amplitude();
                }
            }
        });
    Ok(VacuumEnsemble {
        n_trials,
        seed,
        modes: modes.to_vec(),
        amplitudes,
    })
}

pub fn mean_intensity(ensemble: &VacuumEnsemble, mode: &Mode) -> Result<f64> {
    Ok(ensemble.intensity_stats(mode)?.0)
}

/// Positioned view into the keystream of one mode.
pub(crate) struct VacuumStream {
    rng: ChaCha8Rng,
}

impl VacuumStream {
    pub(crate) fn new(seed: u64, stream: u64, first_draw: u128) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(first_draw * WORDS_PER_DRAW);
        VacuumStream { rng }
    }

    /// Uniform on `(0, 1]`.
    pub(crate) fn open_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)`.
    pub(crate) fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Complex Gaussian with `<|a|^2> = 1/2` via Box-Muller. Consumes exactly two `u64`.
    pub(crate) fn next_amplitude(&mut self) -> Complex64 {
        let u1 = self.open_uniform();
        let u2 = self.uniform();
        let radius = (-0.5 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        Complex64::new(radius * c, radius * s)
    }
}
