//! Crystal dispersion and phase-matching geometry.
//!
//! The pump travels along the exit-face normal. Every other wave is described
//! by its internal angle from that normal, in the plane that contains the
//! optic axis. The input (idler) wave always sits on the positive side; the
//! down-converted conjugate leaves on the negative side and the up-converted
//! signal on the positive side.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zpf::{Mode, Polarization, Role};

/// Sellmeier form `n^2 = 1 + sum B_j lambda^2 / (lambda^2 - C_j)`, lambda in um.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierCoefficients {
    /// `(B_j, C_j)` pairs; `C_j` in um^2.
    pub terms: Vec<(f64, f64)>,
}

impl SellmeierCoefficients {
    pub fn new(terms: Vec<(f64, f64)>) -> Self {
        SellmeierCoefficients { terms }
    }

    pub fn n_squared(&self, wavelength_um: f64) -> f64 {
        let l2 = wavelength_um * wavelength_um;
        1.0 + self
            .terms
            .iter()
            .map(|&(b, c)| b * l2 / (l2 - c))
            .sum::<f64>()
    }

    pub fn index(&self, wavelength_um: f64) -> f64 {
        self.n_squared(wavelength_um).sqrt()
    }

    fn validate(&self, name: &str, window: (f64, f64)) -> Result<()> {
        let (lo, hi) = (window.0 * window.0, window.1 * window.1);
        for (j, &(b, c)) in self.terms.iter().enumerate() {
            if !(b.is_finite() && c.is_finite()) {
                return Err(Error::config(format!("{name}.terms[{j}]"), "coefficients must be finite"));
            }
            if c >= lo && c <= hi {
                return Err(Error::config(
                    format!("{name}.terms[{j}]"),
                    format!("pole at {} um lies inside the transparency window", c.sqrt()),
                ));
            }
            if self.terms[..j].iter().any(|&(_, other)| other == c) {
                return Err(Error::config(format!("{name}.terms[{j}]"), "duplicate C coefficient"));
            }
        }
        const SCAN: usize = 512;
        for i in 0..=SCAN {
            let l = window.0 + (window.1 - window.0) * i as f64 / SCAN as f64;
            let n2 = self.n_squared(l);
            // n = 1 is allowed so that dispersionless test media can be configured
            if n2.is_nan() || n2 < 1.0 {
                return Err(Error::config(
                    name.to_string(),
                    format!("n^2 = {n2} < 1 at {l} um"),
                ));
            }
        }
        Ok(())
    }
}

/// Nonlinear crystal and pump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSpec {
    pub sellmeier_o: SellmeierCoefficients,
    pub sellmeier_e: SellmeierCoefficients,
    pub length_mm: f64,
    pub pump_wavelength_nm: f64,
    /// Effective coupling per mm; absorbs the pump amplitude and chi(2).
    pub gain_per_mm: f64,
    pub pump_polarization: Polarization,
    /// Polarization of the down-converted pair (and of the up-conversion input).
    pub down_polarization: Polarization,
    /// Polarization of the up-converted output at `omega_0 + omega`.
    pub up_polarization: Polarization,
    /// Signed angle of the optic axis from the pump direction, degrees.
    pub optic_axis_deg: f64,
    /// Transparency window `(min, max)` in um.
    pub window_um: (f64, f64),
}

impl CrystalSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window_um;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::config("crystal.window_um", "need 0 < min < max"));
        }
        if !(self.length_mm > 0.0 && self.length_mm.is_finite()) {
            return Err(Error::config("crystal.length_mm", "must be > 0"));
        }
        if !(self.gain_per_mm >= 0.0 && self.gain_per_mm.is_finite()) {
            return Err(Error::config("crystal.gain_per_mm", "must be >= 0"));
        }
        if !self.optic_axis_deg.is_finite() {
            return Err(Error::config("crystal.optic_axis_deg", "must be finite"));
        }
        let pump = self.pump_wavelength_nm / 1000.0;
        if !(pump >= lo && pump <= hi) {
            return Err(Error::config(
                "crystal.pump_wavelength_nm",
                "pump wavelength outside the transparency window",
            ));
        }
        self.sellmeier_o.validate("crystal.sellmeier_o", self.window_um)?;
        self.sellmeier_e.validate("crystal.sellmeier_e", self.window_um)?;
        Ok(())
    }

    /// Vacuum wavelength in um of a wave at `omega` (fraction of the pump frequency).
    pub fn wavelength_um(&self, omega: f64) -> f64 {
        self.pump_wavelength_nm / 1000.0 / omega
    }

    fn check_window(&self, wavelength_um: f64) -> Result<()> {
        let (lo, hi) = self.window_um;
        if wavelength_um >= lo && wavelength_um <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                wavelength_um,
                min_um: lo,
                max_um: hi,
            })
        }
    }

    fn optic_axis(&self) -> f64 {
        self.optic_axis_deg.to_radians()
    }
}

/// Principal index: `n_o` for ordinary, `n_e` (wave normal perpendicular to the
/// optic axis) for extraordinary.
pub fn refractive_index(wavelength_um: f64, pol: Polarization, spec: &CrystalSpec) -> Result<f64> {
    spec.check_window(wavelength_um)?;
    Ok(match pol {
        Polarization::Ordinary => spec.sellmeier_o.index(wavelength_um),
        Polarization::Extraordinary => spec.sellmeier_e.index(wavelength_um),
    })
}

/// Index seen by a wave whose normal makes `theta_internal` with the pump
/// direction. Extraordinary waves use the index ellipsoid.
pub fn index_along(
    wavelength_um: f64,
    pol: Polarization,
    theta_internal: f64,
    spec: &CrystalSpec,
) -> Result<f64> {
    spec.check_window(wavelength_um)?;
    let n_o = spec.sellmeier_o.index(wavelength_um);
    Ok(match pol {
        Polarization::Ordinary => n_o,
        Polarization::Extraordinary => {
            let n_e = spec.sellmeier_e.index(wavelength_um);
            let (s, c) = (theta_internal - spec.optic_axis()).sin_cos();
            (c * c / (n_o * n_o) + s * s / (n_e * n_e)).sqrt().recip()
        }
    })
}

fn k_magnitude(omega: f64, pol: Polarization, theta: f64, spec: &CrystalSpec) -> Result<f64> {
    let l = spec.wavelength_um(omega);
    Ok(2.0 * PI * index_along(l, pol, theta, spec)? / l)
}

/// `(k_transverse, k_longitudinal)` in 1/um.
pub fn wavevector(mode: &Mode, spec: &CrystalSpec) -> Result<(f64, f64)> {
    let k = k_magnitude(mode.omega, mode.polarization, mode.theta_internal, spec)?;
    let (s, c) = mode.theta_internal.sin_cos();
    Ok((k * s, k * c))
}

/// `sum k(in) - sum k(out)`, both components, 1/um.
pub fn mismatch(modes_in: &[Mode], modes_out: &[Mode], spec: &CrystalSpec) -> Result<(f64, f64)> {
    if modes_in.is_empty() || modes_out.is_empty() {
        return Err(Error::InvalidArgument("mismatch needs nonempty mode lists".into()));
    }
    let mut dk = (0.0, 0.0);
    for m in modes_in {
        let (t, l) = wavevector(m, spec)?;
        dk.0 += t;
        dk.1 += l;
    }
    for m in modes_out {
        let (t, l) = wavevector(m, spec)?;
        dk.0 -= t;
        dk.1 -= l;
    }
    Ok(dk)
}

/// External angle after refraction at the flat exit face.
pub fn external_angle(omega: f64, pol: Polarization, theta_internal: f64, spec: &CrystalSpec) -> Result<f64> {
    let n = index_along(spec.wavelength_um(omega), pol, theta_internal, spec)?;
    let s = n * theta_internal.sin();
    if s.abs() > 1.0 {
        return Err(Error::NoSolution(format!(
            "wave at omega = {omega} is totally internally reflected (internal angle {theta_internal} rad)"
        )));
    }
    Ok(s.asin())
}

/// Internal angle of the wave at `omega` that carries transverse wavevector `kt`.
pub fn angle_for_transverse(omega: f64, pol: Polarization, kt: f64, spec: &CrystalSpec) -> Result<f64> {
    if kt == 0.0 {
        return Ok(0.0);
    }
    if pol == Polarization::Ordinary {
        let k = k_magnitude(omega, pol, 0.0, spec)?;
        let s = kt / k;
        if s.abs() >= 1.0 {
            return Err(Error::NoSolution(format!(
                "transverse wavevector {kt} exceeds |k| = {k} at omega = {omega}"
            )));
        }
        return Ok(s.asin());
    }
    let edge = kt.signum() * (FRAC_PI_2 - 1e-9);
    let g = |t: f64| -> Result<f64> { Ok(k_magnitude(omega, pol, t, spec)? * t.sin() - kt) };
    let g_edge = g(edge)?;
    if g_edge.signum() == (-kt).signum() {
        return Err(Error::NoSolution(format!(
            "transverse wavevector {kt} not carried by the wave at omega = {omega}"
        )));
    }
    let (lo, hi, flo, fhi) = if kt > 0.0 {
        (0.0, edge, -kt, g_edge)
    } else {
        (edge, 0.0, g_edge, -kt)
    };
    let (t, _) = refine_root(g, lo, hi, flo, fhi, 1e-15, 1e-14)?;
    Ok(t)
}

/// Maximum iterations of the bracketed root search.
const MAX_ITER: usize = 200;
/// Angle tolerance of the phase-matching search, rad.
const ANGLE_TOL: f64 = 1e-10;
/// Longitudinal mismatch accepted as exact, 1/um.
const DK_EXACT: f64 = 1e-13;
/// Largest residual a converged solution may report, 1/um.
pub const DK_TOLERANCE: f64 = 1e-9;
/// Grid used to bracket matched angles on the input side.
const SCAN_POINTS: usize = 400;

/// Bisection refined by false-position steps. Returns `(x, f(x))` with the
/// smallest `|f|` seen.
fn refine_root<F>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    x_tol: f64,
    f_tol: f64,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut best = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    for _ in 0..MAX_ITER {
        if best.1.abs() <= f_tol || (hi - lo).abs() <= x_tol {
            break;
        }
        let width = hi - lo;
        let mut x = lo - flo * (hi - lo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 {
            break;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        // secant stalled on one side: force a bisection
        if (hi - lo).abs() > 0.5 * width.abs() {
            let m = 0.5 * (lo + hi);
            let fm = f(m)?;
            if fm.abs() < best.1.abs() {
                best = (m, fm);
            }
            if fm.signum() == flo.signum() {
                lo = m;
                flo = fm;
            } else {
                hi = m;
                fhi = fm;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessBranch {
    Down,
    Up,
}

/// Matched geometry for one frequency.
///
/// `in` is the wave at `omega` (input/idler side); `out` is the conjugate at
/// `1 - omega` for down-conversion or the signal at `1 + omega` for up-conversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchSolution {
    pub branch: ProcessBranch,
    pub omega: f64,
    pub theta_in_internal: f64,
    pub theta_in_external: f64,
    pub theta_out_internal: f64,
    pub theta_out_external: f64,
    pub residual_dk: f64,
}

impl PhaseMatchSolution {
    pub fn out_omega(&self) -> f64 {
        match self.branch {
            ProcessBranch::Down => 1.0 - self.omega,
            ProcessBranch::Up => 1.0 + self.omega,
        }
    }

    pub fn input_mode(&self, spec: &CrystalSpec) -> Mode {
        Mode {
            omega: self.omega,
            theta_external: self.theta_in_external,
            theta_internal: self.theta_in_internal,
            polarization: spec.down_polarization,
            role: Role::Input,
        }
    }

    pub fn output_mode(&self, spec: &CrystalSpec) -> Mode {
        Mode {
            omega: self.out_omega(),
            theta_external: self.theta_out_external,
            theta_internal: self.theta_out_internal,
            polarization: match self.branch {
                ProcessBranch::Down => spec.down_polarization,
                ProcessBranch::Up => spec.up_polarization,
            },
            role: Role::Signal,
        }
    }
}

/// Pump wave along the exit-face normal.
pub fn pump_mode(spec: &CrystalSpec) -> Mode {
    Mode {
        omega: 1.0,
        theta_external: 0.0,
        theta_internal: 0.0,
        polarization: spec.pump_polarization,
        role: Role::Pump,
    }
}

/// Wave at `omega` and internal angle `theta_internal`, with its external angle.
pub fn mode_at(
    omega: f64,
    pol: Polarization,
    theta_internal: f64,
    role: Role,
    spec: &CrystalSpec,
) -> Result<Mode> {
    let theta_external = external_angle(omega, pol, theta_internal, spec)?;
    Mode::new(omega, theta_external, theta_internal, pol, role)
}

struct Geometry<'a> {
    spec: &'a CrystalSpec,
    branch: ProcessBranch,
    omega: f64,
    pump_k: f64,
}

impl Geometry<'_> {
    fn out_omega(&self) -> f64 {
        match self.branch {
            ProcessBranch::Down => 1.0 - self.omega,
            ProcessBranch::Up => 1.0 + self.omega,
        }
    }

    fn out_pol(&self) -> Polarization {
        match self.branch {
            ProcessBranch::Down => self.spec.down_polarization,
            ProcessBranch::Up => self.spec.up_polarization,
        }
    }

    /// Output angle fixed by transverse balance, and the longitudinal mismatch
    /// `sum k(in) - sum k(out)` for the input wave at `theta`.
    fn evaluate(&self, theta: f64) -> Result<(f64, f64)> {
        let spec = self.spec;
        let k_in = k_magnitude(self.omega, spec.down_polarization, theta, spec)?;
        let (s, c) = theta.sin_cos();
        let (kt_out, kl_in) = match self.branch {
            ProcessBranch::Down => (-k_in * s, self.pump_k),
            ProcessBranch::Up => (k_in * s, self.pump_k + k_in * c),
        };
        let theta_out = angle_for_transverse(self.out_omega(), self.out_pol(), kt_out, spec)?;
        let k_out = k_magnitude(self.out_omega(), self.out_pol(), theta_out, spec)?;
        let kl_out = k_out * theta_out.cos()
            + match self.branch {
                ProcessBranch::Down => k_in * c,
                ProcessBranch::Up => 0.0,
            };
        Ok((theta_out, kl_in - kl_out))
    }

    fn solution(&self, theta: f64) -> Result<PhaseMatchSolution> {
        let (theta_out, dk) = self.evaluate(theta)?;
        let spec = self.spec;
        Ok(PhaseMatchSolution {
            branch: self.branch,
            omega: self.omega,
            theta_in_internal: theta,
            theta_in_external: external_angle(self.omega, spec.down_polarization, theta, spec)?,
            theta_out_internal: theta_out,
            theta_out_external: external_angle(self.out_omega(), self.out_pol(), theta_out, spec)?,
            residual_dk: dk,
        })
    }

    /// All matched input angles on the positive side, ordered by `|theta|`.
    fn branches(&self) -> Result<Vec<PhaseMatchSolution>> {
        let (_, f0) = self.evaluate(0.0)?;
        if f0.abs() <= DK_EXACT {
            return Ok(vec![self.solution(0.0)?]);
        }
        let mut roots = Vec::new();
        let mut prev = (0.0, f0);
        for i in 1..=SCAN_POINTS {
            let t = (FRAC_PI_2 - 1e-6) * i as f64 / SCAN_POINTS as f64;
            // beyond the transverse-balance limit the geometry no longer exists
            let Ok((_, ft)) = self.evaluate(t) else { break };
            if ft == 0.0 {
                roots.push(t);
            } else if ft.signum() != prev.1.signum() && prev.1 != 0.0 {
                let f = |x: f64| self.evaluate(x).map(|(_, dk)| dk);
                let (x, _) = refine_root(f, prev.0, t, prev.1, ft, ANGLE_TOL, DK_EXACT)?;
                roots.push(x);
            }
            prev = (t, ft);
        }
        let mut out = Vec::with_capacity(roots.len());
        for t in roots {
            let sol = self.solution(t)?;
            if sol.residual_dk.abs() >= DK_TOLERANCE {
                return Err(Error::NoSolution(format!(
                    "{:?} search at omega = {} stalled with residual {}",
                    self.branch, self.omega, sol.residual_dk
                )));
            }
            out.push(sol);
        }
        if out.is_empty() {
            return Err(Error::NoSolution(format!(
                "{} not phase matchable at omega = {}",
                match self.branch {
                    ProcessBranch::Down => "down-conversion",
                    ProcessBranch::Up => "up-conversion",
                },
                self.omega
            )));
        }
        Ok(out)
    }
}

fn geometry(spec: &CrystalSpec, branch: ProcessBranch, omega: f64) -> Result<Geometry<'_>> {
    Ok(Geometry {
        spec,
        branch,
        omega,
        pump_k: k_magnitude(1.0, spec.pump_polarization, 0.0, spec)?,
    })
}

/// Every down-conversion branch at `omega`, smallest `|theta|` first.
pub fn match_down_branches(omega: f64, spec: &CrystalSpec) -> Result<Vec<PhaseMatchSolution>> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "down-conversion needs 0 < omega < 1, got {omega}"
        )));
    }
    geometry(spec, ProcessBranch::Down, omega)?.branches()
}

/// Every up-conversion branch at `omega`, smallest `|theta|` first.
pub fn match_up_branches(omega: f64, spec: &CrystalSpec) -> Result<Vec<PhaseMatchSolution>> {
    if omega.is_nan() || omega <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "up-conversion needs omega > 0, got {omega}"
        )));
    }
    spec.check_window(spec.wavelength_um(1.0 + omega))?;
    geometry(spec, ProcessBranch::Up, omega)?.branches()
}

/// Down-conversion geometry: `k(pump) = k(omega) + k(1 - omega)`.
pub fn match_down(omega: f64, spec: &CrystalSpec) -> Result<PhaseMatchSolution> {
    match_down_branches(omega, spec).map(|b| b[0])
}

/// Up-conversion geometry: `k(pump) + k(omega) = k(1 + omega)`.
pub fn match_up(omega: f64, spec: &CrystalSpec) -> Result<PhaseMatchSolution> {
    match_up_branches(omega, spec).map(|b| b[0])
}

/// Select one branch by index; index 0 is what [`match_down`] and [`match_up`] return.
pub fn select_branch(branches: &[PhaseMatchSolution], index: usize) -> Result<PhaseMatchSolution> {
    branches.get(index).copied().ok_or_else(|| {
        Error::NoSolution(format!(
            "branch {index} requested but only {} exist",
            branches.len()
        ))
    })
}


#[cfg(test)]
mod tests {
    use super::test_crystals::{flat, model};
    use super::*;

    #[test]
    fn single_term_sellmeier() {
        let mut spec = model();
        spec.sellmeier_o = SellmeierCoefficients::new(vec![(1.25, 0.01)]);
        let n = refractive_index(1.0, Polarization::Ordinary, &spec).unwrap();
        let expect = (1.0 + 1.25 / (1.0 - 0.01f64)).sqrt();
        assert!((n - expect).abs() < 1e-15);
        assert!((n - 1.504203).abs() < 1e-6);
    }

    #[test]
    fn zero_coefficients_give_vacuum() {
        let spec = flat();
        for l in [0.25, 0.5, 1.0, 2.5] {
            assert_eq!(refractive_index(l, Polarization::Ordinary, &spec).unwrap(), 1.0);
            assert_eq!(refractive_index(l, Polarization::Extraordinary, &spec).unwrap(), 1.0);
        }
    }

    #[test]
    fn outside_window_is_a_domain_error() {
        let spec = model();
        assert!(matches!(
            refractive_index(0.1, Polarization::Ordinary, &spec),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            refractive_index(3.5, Polarization::Extraordinary, &spec),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn validation_catches_bad_crystals() {
        let mut spec = model();
        spec.sellmeier_o.terms.push((0.1, 0.25)); // pole at 0.5 um
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig { .. })));
        let mut spec = model();
        spec.sellmeier_e.terms.push((0.2, 0.0003));
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig { .. })));
        let mut spec = model();
        spec.length_mm = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = model();
        spec.pump_wavelength_nm = 100.0;
        assert!(spec.validate().is_err());
        assert!(model().validate().is_ok());
    }

    #[test]
    fn wavevector_components() {
        let mut spec = flat();
        spec.sellmeier_o = SellmeierCoefficients::new(vec![(1.25, 0.0)]);
        spec.pump_wavelength_nm = 1000.0;
        let m = Mode::new(1.0, 0.0, 0.0, Polarization::Ordinary, Role::Pump).unwrap();
        let (kt, kl) = wavevector(&m, &spec).unwrap();
        assert_eq!(kt, 0.0);
        assert!((kl - 3.0 * PI).abs() < 1e-12, "{kl}");
        for theta in [-0.3, 0.2] {
            let m = Mode::new(0.5, 0.0, theta, Polarization::Ordinary, Role::Input).unwrap();
            let (kt, _) = wavevector(&m, &spec).unwrap();
            assert_eq!(kt.signum(), theta.signum());
        }
    }

    #[test]
    fn degenerate_equal_indices_are_collinear() {
        let spec = flat();
        let sol = match_down(0.5, &spec).unwrap();
        assert_eq!(sol.theta_in_internal, 0.0);
        assert_eq!(sol.theta_out_internal, 0.0);
    }

    #[test]
    fn down_solution_satisfies_momentum_balance() {
        let spec = model();
        for omega in [0.35, 0.5, 0.62] {
            let sol = match_down(omega, &spec).unwrap();
            assert!(sol.residual_dk.abs() < DK_TOLERANCE);
            assert!(sol.theta_in_internal > 0.0 && sol.theta_out_internal < 0.0);
            let pump = pump_mode(&spec);
            let dk = mismatch(&[pump], &[sol.input_mode(&spec), sol.output_mode(&spec)], &spec).unwrap();
            assert!(dk.0.abs() < 1e-12 && dk.1.abs() < DK_TOLERANCE, "{dk:?}");
        }
    }

    #[test]
    fn up_solution_is_on_the_idler_side() {
        let spec = model();
        let sol = match_up(0.5, &spec).unwrap();
        assert!(sol.residual_dk.abs() < DK_TOLERANCE);
        assert_eq!(sol.theta_in_internal.signum(), sol.theta_out_internal.signum());
        let dk = mismatch(
            &[pump_mode(&spec), sol.input_mode(&spec)],
            &[sol.output_mode(&spec)],
            &spec,
        )
        .unwrap();
        assert!(dk.0.abs() < 1e-12 && dk.1.abs() < DK_TOLERANCE, "{dk:?}");
    }

    #[test]
    fn down_closed_form_agrees() {
        // law of cosines for ordinary pair waves
        let spec = model();
        let omega = 0.45;
        let k = |w: f64, pol| k_magnitude(w, pol, 0.0, &spec).unwrap();
        let kp = k(1.0, Polarization::Extraordinary);
        let k1 = k(omega, Polarization::Ordinary);
        let k2 = k(1.0 - omega, Polarization::Ordinary);
        let expect = ((kp * kp + k1 * k1 - k2 * k2) / (2.0 * kp * k1)).acos();
        let sol = match_down(omega, &spec).unwrap();
        assert!((sol.theta_in_internal - expect).abs() < 1e-9);
    }

    #[test]
    fn mismatch_identity_and_small_tilt() {
        let spec = model();
        let pump = pump_mode(&spec);
        assert_eq!(mismatch(&[pump], &[pump], &spec).unwrap(), (0.0, 0.0));
        let delta = 1e-4;
        let tilted = Mode { theta_internal: delta, ..pump };
        let (dkt, _) = mismatch(&[pump], &[tilted], &spec).unwrap();
        let k = wavevector(&pump, &spec).unwrap().1;
        assert!((dkt + k * delta.sin()).abs() < 10.0 * k * delta * delta, "{dkt}");
        assert!(matches!(mismatch(&[], &[pump], &spec), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unmatchable_frequency_is_reported() {
        // an ordinary pump sees a higher index than the pair: no solution anywhere
        let mut spec = model();
        spec.pump_polarization = Polarization::Ordinary;
        assert!(matches!(match_down(0.5, &spec), Err(Error::NoSolution(_))));
        assert!(matches!(match_down(1.2, &spec), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn branch_selection() {
        let spec = model();
        let all = match_up_branches(0.5, &spec).unwrap();
        assert_eq!(select_branch(&all, 0).unwrap(), match_up(0.5, &spec).unwrap());
        assert!(select_branch(&all, all.len()).is_err());
        for pair in all.windows(2) {
            assert!(pair[0].theta_in_internal.abs() <= pair[1].theta_in_internal.abs());
        }
    }

    #[test]
    fn extraordinary_transverse_inversion() {
        let spec = model();
        for kt in [-8.0, -1.0, 0.5, 9.0] {
            let t = angle_for_transverse(1.5, Polarization::Extraordinary, kt, &spec).unwrap();
            let k = k_magnitude(1.5, Polarization::Extraordinary, t, &spec).unwrap();
            assert!((k * t.sin() - kt).abs() < 1e-12);
        }
    }
}
