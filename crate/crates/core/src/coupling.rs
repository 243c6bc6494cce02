//! The pumped crystal as a linear Bogoliubov map on mode amplitudes.
//!
//! A transform acts on the stacked vector `(a_1..a_M, a_1*..a_M*)` through
//! `[[U, V], [V*, U*]]`. Down-conversion creates pairs (`V != 0`); up-conversion
//! only exchanges amplitude between modes (`V = 0`), so on its own it leaves
//! the vacuum untouched.
//!
//! The three-wave system couples the wave at `omega` to its down-conversion
//! partner at `1 - omega` and its up-conversion partner at `1 + omega`:
//!
//! ```text
//! da/dz = g_d e^{i phi_d} e^{i dk_d z} b* + g_u e^{i phi_u} e^{i dk_u z} c
//! db/dz = g_d e^{i phi_d} e^{i dk_d z} a*
//! dc/dz = -g_u e^{-i phi_u} e^{-i dk_u z} a
//! ```
//!
//! `(a, b*, c)` is closed under this evolution, so everything reduces to a
//! 3x3 complex propagator. [`ThreeWaveSystem::generator`] is the only place
//! the coupling model enters; an alternative coupling would replace it.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::zpf::{GaussianState, Mode, VacuumEnsemble};

type C = Complex64;
type Mat3 = [[C; 3]; 3];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Minimum samples per period of the fastest mismatch phase.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;
const RECOMMENDED_SAMPLES_PER_PERIOD: f64 = 400.0;
const RECOMMENDED_MIN_STEPS: usize = 1000;
/// Trials mapped per work item in [`apply`].
const TRIAL_BLOCK: usize = 4096;

/// Linear input-to-output map of mode amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovTransform {
    m: DMatrix<C>,
}

impl BogoliubovTransform {
    pub fn identity(n_modes: usize) -> Self {
        BogoliubovTransform {
            m: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn from_blocks(u: &DMatrix<C>, v: &DMatrix<C>) -> Result<Self> {
        let n = u.nrows();
        if u.ncols() != n || v.nrows() != n || v.ncols() != n {
            return Err(Error::InvalidArgument("U and V must be square and equal in size".into()));
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(u);
        m.view_mut((0, n), (n, n)).copy_from(v);
        m.view_mut((n, 0), (n, n)).copy_from(&v.map(|x| x.conj()));
        m.view_mut((n, n), (n, n)).copy_from(&u.map(|x| x.conj()));
        Ok(BogoliubovTransform { m })
    }

    pub fn n_modes(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<C> {
        &self.m
    }

    pub fn u(&self) -> DMatrix<C> {
        let n = self.n_modes();
        self.m.view((0, 0), (n, n)).into_owned()
    }

    pub fn v(&self) -> DMatrix<C> {
        let n = self.n_modes();
        self.m.view((0, n), (n, n)).into_owned()
    }

    /// Largest deviation from the conjugation block structure.
    pub fn block_defect(&self) -> f64 {
        let n = self.n_modes();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                worst = worst
                    .max((self.m[(n + r, c)] - self.m[(r, n + c)].conj()).norm())
                    .max((self.m[(n + r, n + c)] - self.m[(r, c)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry of `U U^dag - V V^dag - I` and of the antisymmetric part of `U V^T`.
    pub fn symplectic_defect(&self) -> f64 {
        let (u, v) = (self.u(), self.v());
        let n = u.nrows();
        let gram = &u * u.adjoint() - &v * v.adjoint() - DMatrix::<C>::identity(n, n);
        let uvt = &u * v.transpose();
        let skew = &uvt - uvt.transpose();
        let g = gram.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let s = skew.iter().map(|x| x.norm()).fold(0.0, f64::max);
        g.max(s)
    }

    pub fn is_passive(&self) -> bool {
        self.v().iter().all(|x| *x == ZERO)
    }

    /// Inverse of a symplectic map: `[[U^dag, -V^T], [-V^dag, U^T]]`.
    pub fn inverse(&self) -> Self {
        let (u, v) = (self.u(), self.v());
        BogoliubovTransform::from_blocks(&u.adjoint(), &(-v.transpose())).expect("square blocks")
    }

    /// `self` after `first`.
    pub fn after(&self, first: &BogoliubovTransform) -> Result<Self> {
        if self.n_modes() != first.n_modes() {
            return Err(Error::InvalidArgument("transform sizes differ".into()));
        }
        Ok(BogoliubovTransform { m: &self.m * &first.m })
    }

    /// Place this transform on modes `indices` of an `n_modes` system, identity elsewhere.
    pub fn embed(&self, n_modes: usize, indices: &[usize]) -> Result<Self> {
        let k = self.n_modes();
        if indices.len() != k || indices.iter().any(|&i| i >= n_modes) {
            return Err(Error::InvalidArgument("embedding indices do not fit".into()));
        }
        let (u, v) = (self.u(), self.v());
        let mut big_u = DMatrix::<C>::identity(n_modes, n_modes);
        let mut big_v = DMatrix::<C>::zeros(n_modes, n_modes);
        for (r, &ir) in indices.iter().enumerate() {
            for (c, &ic) in indices.iter().enumerate() {
                big_u[(ir, ic)] = u[(r, c)];
                big_v[(ir, ic)] = v[(r, c)];
            }
        }
        BogoliubovTransform::from_blocks(&big_u, &big_v)
    }

    /// Real quadrature matrix `S` acting on `(x_1..x_M, p_1..p_M)`.
    pub fn quadrature_matrix(&self) -> DMatrix<f64> {
        let (u, v) = (self.u(), self.v());
        let n = u.nrows();
        let mut s = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                let (uu, vv) = (u[(r, c)], v[(r, c)]);
                s[(r, c)] = uu.re + vv.re;
                s[(r, n + c)] = vv.im - uu.im;
                s[(n + r, c)] = uu.im + vv.im;
                s[(n + r, n + c)] = uu.re - vv.re;
            }
        }
        s
    }

    /// Build the full map from the propagator of `(a, b*, c)`.
    fn from_reduced(t: &Mat3) -> Self {
        let mut u = DMatrix::<C>::zeros(3, 3);
        let mut v = DMatrix::<C>::zeros(3, 3);
        // a_out = T00 a + T01 b* + T02 c
        u[(0, 0)] = t[0][0];
        v[(0, 1)] = t[0][1];
        u[(0, 2)] = t[0][2];
        // b_out = conj(T10) a* + conj(T11) b + conj(T12) c*
        v[(1, 0)] = t[1][0].conj();
        u[(1, 1)] = t[1][1].conj();
        v[(1, 2)] = t[1][2].conj();
        // c_out = T20 a + T21 b* + T22 c
        u[(2, 0)] = t[2][0];
        v[(2, 1)] = t[2][1];
        u[(2, 2)] = t[2][2];
        BogoliubovTransform::from_blocks(&u, &v).expect("3x3 blocks")
    }
}

/// Two-mode squeezer on `(signal, idler)`:
/// `a_s -> a_s cosh r + e^{i phi} a_i* sinh r`, and symmetrically.
pub fn squeeze_pair(r: f64, phi: f64) -> BogoliubovTransform {
    let (ch, sh) = (r.cosh(), r.sinh());
    let e = C::from_polar(1.0, phi) * sh;
    let u = DMatrix::from_row_slice(2, 2, &[C::from(ch), ZERO, ZERO, C::from(ch)]);
    let v = DMatrix::from_row_slice(2, 2, &[ZERO, e, e, ZERO]);
    BogoliubovTransform::from_blocks(&u, &v).expect("2x2 blocks")
}

/// Passive exchange on `(omega, omega_0 + omega)`:
/// `a -> a cos k + e^{i phi} c sin k`, `c -> c cos k - e^{-i phi} a sin k`.
pub fn convert_pair(kappa: f64, phi: f64) -> BogoliubovTransform {
    let (s, c) = kappa.sin_cos();
    let u = DMatrix::from_row_slice(
        2,
        2,
        &[
            C::from(c),
            C::from_polar(s, phi),
            -C::from_polar(s, -phi),
            C::from(c),
        ],
    );
    BogoliubovTransform::from_blocks(&u, &DMatrix::zeros(2, 2)).expect("2x2 blocks")
}

/// Three coupled waves `(omega, 1 - omega, 1 + omega)` in a crystal of given length.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeWaveSystem {
    pub modes: [Mode; 3],
    /// Coupling strengths per mm.
    pub g_down: f64,
    pub g_up: f64,
    pub phi_down: f64,
    pub phi_up: f64,
    /// Longitudinal mismatches, 1/um.
    pub dk_down: f64,
    pub dk_up: f64,
    pub length_mm: f64,
    /// RK4 steps over the crystal.
    pub steps: usize,
}

impl ThreeWaveSystem {
    fn length_um(&self) -> f64 {
        self.length_mm * 1000.0
    }

    /// Periods of the fastest mismatch phase over the crystal.
    pub fn mismatch_periods(&self) -> f64 {
        self.dk_down.abs().max(self.dk_up.abs()) * self.length_um() / (2.0 * PI)
    }

    pub fn recommended_steps(&self) -> usize {
        let by_phase = (RECOMMENDED_SAMPLES_PER_PERIOD * self.mismatch_periods()).ceil() as usize;
        by_phase.max(RECOMMENDED_MIN_STEPS)
    }

    pub fn with_recommended_steps(mut self) -> Self {
        self.steps = self.recommended_steps();
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.length_mm > 0.0 && self.length_mm.is_finite()) {
            return Err(Error::config("three_wave.length_mm", "must be > 0"));
        }
        if !(self.g_down >= 0.0 && self.g_up >= 0.0) {
            return Err(Error::config("three_wave.g", "couplings must be >= 0"));
        }
        let needed = (MIN_SAMPLES_PER_PERIOD * self.mismatch_periods()).ceil() as usize;
        if self.steps == 0 || self.steps < needed {
            return Err(Error::config(
                "three_wave.steps",
                format!(
                    "{} steps cannot resolve {:.3} mismatch periods (need at least {})",
                    self.steps,
                    self.mismatch_periods(),
                    needed.max(1)
                ),
            ));
        }
        Ok(())
    }

    /// Per-um coupling coefficients and their phase rates: entry `(i, j)` of the
    /// generator is `coef[i][j] * exp(i rate[i][j] z)`.
    fn generator_terms(&self) -> ([[C; 3]; 3], [[f64; 3]; 3]) {
        let gd = self.g_down / 1000.0;
        let gu = self.g_up / 1000.0;
        let mut coef = [[ZERO; 3]; 3];
        let mut rate = [[0.0; 3]; 3];
        coef[0][1] = C::from_polar(gd, self.phi_down);
        rate[0][1] = self.dk_down;
        coef[0][2] = C::from_polar(gu, self.phi_up);
        rate[0][2] = self.dk_up;
        coef[1][0] = C::from_polar(gd, -self.phi_down);
        rate[1][0] = -self.dk_down;
        coef[2][0] = -C::from_polar(gu, -self.phi_up);
        rate[2][0] = -self.dk_up;
        (coef, rate)
    }

    /// Generator of the `(a, b*, c)` evolution at depth `z_um`.
    pub fn generator(&self, z_um: f64) -> [[C; 3]; 3] {
        let (coef, rate) = self.generator_terms();
        let mut a = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if coef[i][j] != ZERO {
                    a[i][j] = coef[i][j] * C::from_polar(1.0, rate[i][j] * z_um);
                }
            }
        }
        a
    }
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat_axpy(x: &Mat3, s: f64, y: &Mat3) -> Mat3 {
    let mut out = *x;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += y[i][j] * s;
        }
    }
    out
}

const IDENTITY3: Mat3 = [[ONE, ZERO, ZERO], [ZERO, ONE, ZERO], [ZERO, ZERO, ONE]];

/// Classical fixed-step RK4 over `z in [0, L]`.
pub fn integrate_three_wave(system: &ThreeWaveSystem) -> Result<BogoliubovTransform> {
    system.validate()?;
    let n = system.steps;
    let h = system.length_um() / n as f64;
    let mut t = IDENTITY3;
    for step in 0..n {
        let z = step as f64 * h;
        let a0 = system.generator(z);
        let a_mid = system.generator(z + 0.5 * h);
        let a1 = system.generator(z + h);
        let k1 = mat_mul(&a0, &t);
        let k2 = mat_mul(&a_mid, &mat_axpy(&t, 0.5 * h, &k1));
        let k3 = mat_mul(&a_mid, &mat_axpy(&t, 0.5 * h, &k2));
        let k4 = mat_mul(&a1, &mat_axpy(&t, h, &k3));
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] += (k1[i][j] + (k2[i][j] + k3[i][j]) * 2.0 + k4[i][j]) * (h / 6.0);
            }
        }
    }
    Ok(BogoliubovTransform::from_reduced(&t))
}

/// `(e^{i x} - 1) / (i x)`, accurate near zero.
fn phi1(x: f64) -> C {
    if x.abs() < 1e-4 {
        return C::new(1.0 - x * x / 6.0, x / 2.0 - x * x * x / 24.0);
    }
    let half = (0.5 * x).sin();
    C::new(x.sin() / x, 2.0 * half * half / x)
}

/// `M_n(x) = int_0^1 s^n e^{i x s} ds` for n = 0..=3.
fn moments(x: f64) -> [C; 4] {
    let mut m = [ZERO; 4];
    if x.abs() < 1.0 {
        let ix = C::new(0.0, x);
        for (n, slot) in m.iter_mut().enumerate() {
            let mut term = ONE; // (ix)^k / k!
            let mut sum = ZERO;
            for k in 0..40 {
                sum += term / (n + k + 1) as f64;
                term = term * ix / (k + 1) as f64;
            }
            *slot = sum;
        }
    } else {
        let e = C::from_polar(1.0, x);
        let ix = C::new(0.0, x);
        m[0] = phi1(x);
        for n in 1..4 {
            m[n] = (e - m[n - 1] * n as f64) / ix;
        }
    }
    m
}

/// `int_0^L e^{i d z} dz`.
pub fn phase_integral(dk: f64, length_um: f64) -> C {
    phi1(dk * length_um) * length_um
}

/// `int_0^L dz1 e^{i p z1} int_0^{z1} dz2 e^{i q z2}`.
pub fn double_phase_integral(p: f64, q: f64, length_um: f64) -> C {
    let (pl, ql) = (p * length_um, q * length_um);
    let l2 = length_um * length_um;
    if ql.abs() < 1e-4 {
        double_series(pl, ql) * l2
    } else {
        double_difference(pl, ql) * l2
    }
}

/// Dimensionless double integral, expanded in small `q`.
fn double_series(p: f64, q: f64) -> C {
    let m = moments(p);
    let iq = C::new(0.0, q);
    m[1] + iq * m[2] / 2.0 + iq * iq * m[3] / 6.0
}

fn double_difference(p: f64, q: f64) -> C {
    (phi1(p + q) - phi1(p)) / C::new(0.0, q)
}

/// Dyson series of the three-wave evolution truncated at `order` (1 or 2).
pub fn perturbative_transform(system: &ThreeWaveSystem, order: u32) -> Result<BogoliubovTransform> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidArgument(format!("order must be 1 or 2, got {order}")));
    }
    let l = system.length_um();
    let (coef, rate) = system.generator_terms();
    let mut t = IDENTITY3;
    for i in 0..3 {
        for j in 0..3 {
            if coef[i][j] != ZERO {
                t[i][j] += coef[i][j] * phase_integral(rate[i][j], l);
            }
        }
    }
    if order == 2 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    if coef[i][k] != ZERO && coef[k][j] != ZERO {
                        t[i][j] += coef[i][k]
                            * coef[k][j]
                            * double_phase_integral(rate[i][k], rate[k][j], l);
                    }
                }
            }
        }
    }
    Ok(BogoliubovTransform::from_reduced(&t))
}

/// Map every trial of `ensemble` through `t`.
pub fn apply(t: &BogoliubovTransform, ensemble: &VacuumEnsemble) -> Result<VacuumEnsemble> {
    let m = ensemble.n_modes();
    if t.n_modes() != m {
        return Err(Error::InvalidArgument(format!(
            "transform acts on {} modes, ensemble has {m}",
            t.n_modes()
        )));
    }
    // sparse rows: (column, coefficient on a, coefficient on a*)
    let (u, v) = (t.u(), t.v());
    let rows: Vec<Vec<(usize, C, C)>> = (0..m)
        .map(|r| {
            (0..m)
                .filter(|&c| u[(r, c)] != ZERO || v[(r, c)] != ZERO)
                .map(|c| (c, u[(r, c)], v[(r, c)]))
                .collect()
        })
        .collect();
    let mut out = vec![ZERO; ensemble.amplitudes.len()];
    out.par_chunks_mut(TRIAL_BLOCK * m)
        .zip(ensemble.amplitudes.par_chunks(TRIAL_BLOCK * m))
        .for_each(|(dst, src)| {
            for (o, a) in dst.chunks_exact_mut(m).zip(src.chunks_exact(m)) {
                for (slot, row) in o.iter_mut().zip(&rows) {
                    let mut acc: Option<C> = None;
                    for &(c, uc, vc) in row {
                        let mut term = if uc != ZERO { uc * a[c] } else { ZERO };
                        if vc != ZERO {
                            term += vc * a[c].conj();
                        }
                        acc = Some(match acc {
                            Some(s) => s + term,
                            None => term,
                        });
                    }
                    *slot = acc.unwrap_or(ZERO);
                }
            }
        });
    Ok(VacuumEnsemble {
        n_trials: ensemble.n_trials,
        seed: ensemble.seed,
        modes: ensemble.modes.clone(),
        amplitudes: out,
    })
}

/// Exact image of a Gaussian state.
pub fn propagate_covariance(t: &BogoliubovTransform, state: &GaussianState) -> Result<GaussianState> {
    if t.n_modes() != state.n_modes() {
        return Err(Error::InvalidArgument(format!(
            "transform acts on {} modes, state has {}",
            t.n_modes(),
            state.n_modes()
        )));
    }
    let s = t.quadrature_matrix();
    let mut cov = &s * &state.covariance * s.transpose();
    let n = cov.nrows();
    for r in 0..n {
        for c in r + 1..n {
            let avg = 0.5 * (cov[(r, c)] + cov[(c, r)]);
            cov[(r, c)] = avg;
            cov[(c, r)] = avg;
        }
    }
    let mean = &s * nalgebra::DVector::from_column_slice(&state.mean);
    Ok(GaussianState {
        modes: state.modes.clone(),
        mean: mean.iter().copied().collect(),
        covariance: cov,
    })
}
