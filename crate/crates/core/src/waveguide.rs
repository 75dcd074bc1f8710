//! Fundamental HE11 mode of a step-index cylinder with a vacuum (or low-index)
//! cladding, solved from the exact full-vector characteristic equation.
//!
//! Field expressions follow the standard hybrid-mode solution with
//! `U = a√(k²n₁² − β²)`, `W = a√(β² − k²n₂²)` and the hybrid parameter
//! `s = (1/U² + 1/W²) / [J₁'(U)/(U J₁(U)) + K₁'(W)/(W K₁(W))]`.
//! Radial profiles are azimuthally averaged, which for HE11 coincides with
//! the circularly polarized intensity.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{SILICA_INDEX_852, SPEED_OF_LIGHT, EPSILON_0};
use crate::quad::Composite;
use crate::special::{bessel_j, bessel_k_scaled};
use crate::{Error, Result};

/// First zero of J₁; HE11 always has `U` below it.
const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;
/// First zero of J₀; single-mode cutoff for the V number.
pub const SINGLE_MODE_CUTOFF: f64 = 2.404_825_557_695_773;

const BRACKET_EPS: f64 = 1e-9;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub radius_m: f64,
    pub wavelength_m: f64,
    pub n_core: f64,
    pub n_clad: f64,
}

impl FiberSpec {
    /// Silica nanofiber in vacuum.
    pub fn silica(radius_m: f64, wavelength_m: f64) -> Self {
        Self { radius_m, wavelength_m, n_core: SILICA_INDEX_852, n_clad: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > 0.0) {
            return Err(Error::invalid("radius_m", "must be positive"));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(Error::invalid("wavelength_m", "must be positive"));
        }
        if !(self.n_clad >= 1.0) {
            return Err(Error::invalid("n_clad", "must be at least 1"));
        }
        if !(self.n_core > self.n_clad) {
            return Err(Error::invalid("n_core", "must exceed n_clad"));
        }
        Ok(())
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }

    pub fn v_number(&self) -> f64 {
        self.k0() * self.radius_m * (self.n_core.powi(2) - self.n_clad.powi(2)).sqrt()
    }
}

/// Field coefficients of a solved mode, sufficient to evaluate radial profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ModeField {
    radius: f64,
    n_core: f64,
    n_clad: f64,
    beta: f64,
    h: f64,
    q: f64,
    u: f64,
    w: f64,
    s: f64,
    s1: f64,
    s2: f64,
    /// J₁(U) / K₁(W), with K scaled by e^{W}.
    ratio_scaled: f64,
    /// 1 / ∫|e|² dA for the unit-amplitude field.
    intensity_norm: f64,
}

impl ModeField {
    /// `K_n(qρ) / K₁(W) · J₁(U)`, evaluated without underflow.
    fn k_term(&self, n: u32, rho: f64) -> f64 {
        let x = self.q * rho;
        self.ratio_scaled * bessel_k_scaled(n, x) * (-(x - self.w)).exp()
    }

    fn raw_intensity(&self, rho: f64) -> f64 {
        let (s, beta) = (self.s, self.beta);
        if rho < self.radius {
            let x = self.h * rho;
            let (j0, j1, j2) = (bessel_j(0, x), bessel_j(1, x), bessel_j(2, x));
            beta * beta / (2.0 * self.h * self.h)
                * ((1.0 - s).powi(2) * j0 * j0 + (1.0 + s).powi(2) * j2 * j2)
                + j1 * j1
        } else {
            let (k0, k1, k2) = (self.k_term(0, rho), self.k_term(1, rho), self.k_term(2, rho));
            beta * beta / (2.0 * self.q * self.q)
                * ((1.0 - s).powi(2) * k0 * k0 + (1.0 + s).powi(2) * k2 * k2)
                + k1 * k1
        }
    }

    /// Longitudinal Poynting flux up to the common factor βωε₀|C|²/4.
    fn raw_flux(&self, rho: f64) -> f64 {
        let s = self.s;
        if rho < self.radius {
            let x = self.h * rho;
            let (j0, j2) = (bessel_j(0, x), bessel_j(2, x));
            self.n_core.powi(2) / (self.h * self.h)
                * ((1.0 - s) * (1.0 - self.s1) * j0 * j0 + (1.0 + s) * (1.0 + self.s1) * j2 * j2)
        } else {
            let (k0, k2) = (self.k_term(0, rho), self.k_term(2, rho));
            self.n_clad.powi(2) / (self.q * self.q)
                * ((1.0 - s) * (1.0 - self.s2) * k0 * k0 + (1.0 + s) * (1.0 + self.s2) * k2 * k2)
        }
    }

    /// Returns (∫ over core, ∫ over cladding) of `f(ρ)·2πρ dρ`.
    fn cross_section_integrals(&self, f: impl Fn(&Self, f64) -> f64) -> (f64, f64) {
        let a = self.radius;
        let core = Composite::new(16, 16).integrate(0.0, a, |rho| f(self, rho) * 2.0 * PI * rho);
        // Cladding in u = ln(ρ/a), out to where e^{-2q(ρ-a)} < e^{-80}.
        let u_max = (1.0 + 40.0 / (self.q * a)).ln();
        let clad = Composite::new(16, 64).integrate(0.0, u_max, |u| {
            let rho = a * u.exp();
            f(self, rho) * 2.0 * PI * rho * rho
        });
        (core, clad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedMode {
    pub n_eff: f64,
    pub beta_per_m: f64,
    pub v_number: f64,
    pub evanescent_fraction: f64,
    /// Set when V ≥ 2.405: higher-order modes are also guided and only the
    /// fundamental is returned.
    pub multimode: bool,
    /// Characteristic-equation residual at `n_eff`.
    pub residual: f64,
    field: ModeField,
}

impl GuidedMode {
    /// Azimuthally averaged intensity normalized to unit integral over the
    /// cross-section (1/m²). The radial electric component jumps at ρ = r by
    /// the factor (n_core/n_clad)² across the dielectric boundary; `ρ = r`
    /// itself evaluates on the cladding side.
    pub fn intensity(&self, rho: f64) -> f64 {
        self.field.raw_intensity(rho.max(0.0)) * self.field.intensity_norm
    }

    /// Cladding decay constant `q = √(β² − k₀²n_clad²)` (1/m).
    pub fn decay_constant(&self) -> f64 {
        self.field.q
    }

    /// Core transverse wavenumber `h = √(k₀²n_core² − β²)` (1/m).
    pub fn core_wavenumber(&self) -> f64 {
        self.field.h
    }

    pub fn hybrid_parameter(&self) -> f64 {
        self.field.s
    }

    pub fn radius(&self) -> f64 {
        self.field.radius
    }

    /// Electric-field intensity `(c ε₀ n_clad / 2)|E|²` just outside the
    /// surface for a guided power of 1 W (W/m² per W).
    pub fn surface_intensity_per_watt(&self) -> f64 {
        let f = &self.field;
        let (core, clad) = f.cross_section_integrals(ModeField::raw_flux);
        let k0 = self.beta_per_m / self.n_eff;
        // P = (βωε₀/4)·∫flux; I = (cε₀n₂/2)|e|².
        let power_per_c2 = 0.25 * self.beta_per_m * k0 * SPEED_OF_LIGHT * EPSILON_0 * (core + clad);
        0.5 * SPEED_OF_LIGHT * EPSILON_0 * f.n_clad * f.raw_intensity(f.radius) / power_per_c2
    }
}

/// HE11 characteristic function at a given effective index; zero at the mode.
fn characteristic(spec: &FiberSpec, n_eff: f64) -> f64 {
    let (u, w) = uw(spec, n_eff);
    let rho = (spec.n_clad / spec.n_core).powi(2);
    let a = j_log_derivative(u);
    let b = k_log_derivative(w);
    let r = (n_eff / spec.n_core).powi(2) * (1.0 / (u * u) + 1.0 / (w * w)).powi(2);
    a + 0.5 * b * (1.0 + rho) + (0.25 * b * b * (1.0 - rho).powi(2) + r).sqrt()
}

fn uw(spec: &FiberSpec, n_eff: f64) -> (f64, f64) {
    let ka = spec.k0() * spec.radius_m;
    let u = ka * (spec.n_core.powi(2) - n_eff * n_eff).max(0.0).sqrt();
    let w = ka * (n_eff * n_eff - spec.n_clad.powi(2)).max(0.0).sqrt();
    (u, w)
}

/// J₁'(U) / (U J₁(U)).
fn j_log_derivative(u: f64) -> f64 {
    bessel_j(0, u) / (u * bessel_j(1, u)) - 1.0 / (u * u)
}

/// K₁'(W) / (W K₁(W)).
fn k_log_derivative(w: f64) -> f64 {
    -bessel_k_scaled(0, w) / (w * bessel_k_scaled(1, w)) - 1.0 / (w * w)
}

/// Solve the fundamental mode.
pub fn solve_he11(spec: &FiberSpec) -> Result<GuidedMode> {
    let mode = solve_fundamental(spec)?;
    if mode.multimode {
        log::warn!("V = {:.3} ≥ 2.405: fiber is multimode, returning HE11 only", mode.v_number);
    }
    Ok(mode)
}

fn solve_fundamental(spec: &FiberSpec) -> Result<GuidedMode> {
    spec.validate()?;
    let v = spec.v_number();
    let multimode = v >= SINGLE_MODE_CUTOFF;
    let k0a = spec.k0() * spec.radius_m;
    let n1 = spec.n_core;
    let n2 = spec.n_clad;

    // HE11 lives at U < j₁,₁ where J₁ has no zero.
    let n_lo_window = (n1 * n1 - (J1_FIRST_ZERO / k0a).powi(2)).max(0.0).sqrt();
    let mut lo = (n2 + BRACKET_EPS).max(n_lo_window + BRACKET_EPS);
    let mut hi = n1 - BRACKET_EPS;
    let f_lo = characteristic(spec, lo);
    let f_hi = characteristic(spec, hi);
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::NoRoot(format!(
            "no sign change of the characteristic equation for r = {:.3e} m, λ = {:.3e} m (V = {v:.4})",
            spec.radius_m, spec.wavelength_m
        )));
    }
    let lo_sign = f_lo.signum();
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = characteristic(spec, mid);
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Secant polish, kept inside the final bracket.
    let (mut x0, mut x1) = (lo, hi);
    let (mut f0, mut f1) = (characteristic(spec, x0), characteristic(spec, x1));
    for _ in 0..8 {
        if f1 == f0 || f1 == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 >= lo - BISECTION_TOL && x2 <= hi + BISECTION_TOL) {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = characteristic(spec, x1);
    }
    let n_eff = if f1.abs() <= f0.abs() { x1 } else { x0 };
    let residual = characteristic(spec, n_eff);

    if n_eff - n2 <= 2.0 * BRACKET_EPS {
        return Err(Error::NoRoot(format!(
            "n_eff collapsed onto the cladding index (V = {v:.4}); field is unbound at solver tolerance"
        )));
    }

    let k0 = spec.k0();
    let beta = n_eff * k0;
    let (u, w) = uw(spec, n_eff);
    let a = spec.radius_m;
    let s = (1.0 / (u * u) + 1.0 / (w * w)) / (j_log_derivative(u) + k_log_derivative(w));
    let mut field = ModeField {
        radius: a,
        n_core: n1,
        n_clad: n2,
        beta,
        h: u / a,
        q: w / a,
        u,
        w,
        s,
        s1: beta * beta * s / (k0 * k0 * n1 * n1),
        s2: beta * beta * s / (k0 * k0 * n2 * n2),
        ratio_scaled: bessel_j(1, u) / bessel_k_scaled(1, w),
        intensity_norm: 1.0,
    };
    let (ic, io) = field.cross_section_integrals(ModeField::raw_intensity);
    field.intensity_norm = 1.0 / (ic + io);
    let (pc, po) = field.cross_section_integrals(ModeField::raw_flux);
    debug_assert!(field.u > 0.0);

    Ok(GuidedMode {
        n_eff,
        beta_per_m: beta,
        v_number: v,
        evanescent_fraction: po / (pc + po),
        multimode,
        residual,
        field,
    })
}

/// Fraction of guided power flowing outside the fiber, recomputed from the
/// mode's flux profile.
pub fn evanescent_fraction(mode: &GuidedMode, spec: &FiberSpec) -> Result<f64> {
    if (mode.radius() - spec.radius_m).abs() > 1e-15 * spec.radius_m {
        return Err(Error::invalid("mode", "was solved for a different fiber"));
    }
    let (core, clad) = mode.field.cross_section_integrals(ModeField::raw_flux);
    Ok(clad / (core + clad))
}

/// Normalized azimuthally averaged intensity at radius `rho` (1/m²).
pub fn mode_intensity(mode: &GuidedMode, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("radius must be non-negative, got {rho}")));
    }
    Ok(mode.intensity(rho))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub diameter_m: f64,
    pub n_eff: f64,
    pub evanescent_fraction: f64,
    /// Intensity just outside the surface, W/m².
    pub surface_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceScan {
    pub points: Vec<SurfacePoint>,
    /// Maximizing diameter, refined by a parabola through the best grid point
    /// and its neighbours.
    pub argmax_diameter_m: f64,
}

/// Evanescent surface intensity versus fiber diameter at fixed guided power.
/// Diameters that do not support a bound mode are skipped.
pub fn surface_intensity_scan(
    wavelength_m: f64,
    diameters_m: &[f64],
    power_w: f64,
    n_core: f64,
    n_clad: f64,
) -> Result<SurfaceScan> {
    if !(power_w > 0.0) {
        return Err(Error::invalid("power_w", "must be positive"));
    }
    let points = diameters_m
        .par_iter()
        .map(|&d| {
            let spec = FiberSpec { radius_m: 0.5 * d, wavelength_m, n_core, n_clad };
            solve_fundamental(&spec).ok().map(|m| {
                let point = SurfacePoint {
                    diameter_m: d,
                    n_eff: m.n_eff,
                    evanescent_fraction: m.evanescent_fraction,
                    surface_intensity: power_w * m.surface_intensity_per_watt(),
                };
                (point, m.multimode)
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let cutoff = points.iter().filter(|(_, multimode)| *multimode).count();
    let points: Vec<SurfacePoint> = points.into_iter().map(|(p, _)| p).collect();
    if points.is_empty() {
        return Err(Error::EmptyScan);
    }
    if cutoff > 0 {
        log::warn!("{cutoff} of {} scanned diameters are multimode; HE11 reported", points.len());
    }
    let best = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.surface_intensity.total_cmp(&b.1.surface_intensity))
        .map(|(i, _)| i)
        .unwrap();
    let mut argmax = points[best].diameter_m;
    if best > 0 && best + 1 < points.len() {
        let (x0, x1, x2) = (points[best - 1].diameter_m, points[best].diameter_m, points[best + 1].diameter_m);
        let (y0, y1, y2) = (
            points[best - 1].surface_intensity,
            points[best].surface_intensity,
            points[best + 1].surface_intensity,
        );
        let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
        if a < 0.0 {
            let vertex = -b / (2.0 * a);
            if vertex > x0 && vertex < x2 {
                argmax = vertex;
            }
        }
    }
    Ok(SurfaceScan { points, argmax_diameter_m: argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 852e-9;

    fn nanofiber() -> FiberSpec {
        FiberSpec::silica(200e-9, LAMBDA)
    }

    #[test]
    fn v_number_matches_closed_form() {
        let spec = nanofiber();
        let want = 2.0 * PI * 200e-9 / LAMBDA * (1.4525f64.powi(2) - 1.0).sqrt();
        assert!((spec.v_number() - want).abs() < 1e-14);
        assert!((spec.v_number() - 1.554).abs() < 1e-3);
    }

    #[test]
    fn nanofiber_mode_is_consistent() {
        let spec = nanofiber();
        let m = solve_he11(&spec).unwrap();
        assert!(!m.multimode);
        assert!(m.n_eff > 1.0 && m.n_eff < 1.4525);
        assert!((m.beta_per_m - m.n_eff * 2.0 * PI / LAMBDA).abs() < 1e-6);
        assert!(m.residual.abs() < 1e-10, "residual {}", m.residual);
        // Frozen from an independent scipy solve of the general ν=1 equation.
        assert!((m.n_eff - 1.068_979_498_398_66).abs() < 1e-9, "n_eff {}", m.n_eff);
        assert!((m.evanescent_fraction - 0.592_576_832_567_754).abs() < 1e-7, "fraction {}", m.evanescent_fraction);
        let again = evanescent_fraction(&m, &spec).unwrap();
        assert_eq!(again, m.evanescent_fraction);
    }

    #[test]
    fn thick_fiber_confines_the_field() {
        let m = solve_he11(&FiberSpec::silica(1e-6, LAMBDA)).unwrap();
        assert!(m.multimode);
        assert!(m.evanescent_fraction < 0.05);
        assert!(m.n_eff > 1.40);
    }

    #[test]
    fn weak_guidance_limit_matches_lp01() {
        // n1 ≈ n2: HE11 reduces to LP01, U J1(U)/J0(U) = W K1(W)/K0(W).
        let spec = FiberSpec { radius_m: 4e-6, wavelength_m: 1.3e-6, n_core: 1.450, n_clad: 1.4497 };
        let m = solve_he11(&spec).unwrap();
        let (u, w) = uw(&spec, m.n_eff);
        let lhs = u * bessel_j(1, u) / bessel_j(0, u);
        let rhs = w * bessel_k_scaled(1, w) / bessel_k_scaled(0, w);
        assert!((lhs - rhs).abs() / rhs < 5e-4, "{lhs} vs {rhs}");
    }

    #[test]
    fn hybrid_parameter_near_minus_one() {
        let m = solve_he11(&nanofiber()).unwrap();
        let s = m.hybrid_parameter();
        assert!(s < -0.5 && s > -1.2, "s = {s}");
    }

    #[test]
    fn intensity_is_normalized() {
        let m = solve_he11(&nanofiber()).unwrap();
        let a = m.radius();
        let core = Composite::new(16, 32).integrate(0.0, a, |r| m.intensity(r) * 2.0 * PI * r);
        let clad = Composite::new(16, 400).integrate(a, a + 60.0 / m.decay_constant(), |r| m.intensity(r) * 2.0 * PI * r);
        assert!((core + clad - 1.0).abs() < 1e-6, "{}", core + clad);
    }

    #[test]
    fn cladding_decay_rate() {
        let m = solve_he11(&nanofiber()).unwrap();
        let r = m.radius();
        let q = m.decay_constant();
        // Far-field asymptotics: ρ·|e|² ∝ e^{-2qρ}(1 + O(1/qρ)); use the ρ-weighted slope.
        let (r1, r2) = (3.0 * r, 4.0 * r);
        let slope = ((r2 * m.intensity(r2)).ln() - (r1 * m.intensity(r1)).ln()) / (r2 - r1);
        assert!((slope + 2.0 * q).abs() / (2.0 * q) < 0.02, "slope {slope}, -2q {}", -2.0 * q);
        let (r1, r2) = (20.0 * r, 21.0 * r);
        let slope = ((r2 * m.intensity(r2)).ln() - (r1 * m.intensity(r1)).ln()) / (r2 - r1);
        assert!((slope + 2.0 * q).abs() / (2.0 * q) < 0.005, "far slope {slope}");
        let ratio = m.intensity(10.0 * r) / m.intensity(r);
        assert!(ratio < 1e-3);
    }

    #[test]
    fn fraction_approaches_one_as_fiber_shrinks() {
        let fr: Vec<f64> = [200e-9, 150e-9, 120e-9, 100e-9, 75e-9]
            .iter()
            .map(|&r| solve_he11(&FiberSpec::silica(r, LAMBDA)).unwrap().evanescent_fraction)
            .collect();
        assert!(fr.windows(2).all(|w| w[1] > w[0]), "{fr:?}");
        assert!(fr[fr.len() - 1] > 0.99 && fr[fr.len() - 1] < 1.0);
    }

    #[test]
    fn monotone_in_radius() {
        let modes: Vec<GuidedMode> = (0..20)
            .map(|i| solve_he11(&FiberSpec::silica(100e-9 + 10e-9 * i as f64, LAMBDA)).unwrap())
            .collect();
        for w in modes.windows(2) {
            assert!(w[1].n_eff > w[0].n_eff);
            assert!(w[1].evanescent_fraction < w[0].evanescent_fraction);
        }
    }

    #[test]
    fn no_root_for_vanishing_radius() {
        let err = solve_he11(&FiberSpec::silica(10e-9, LAMBDA)).unwrap_err();
        assert!(matches!(err, Error::NoRoot(_)), "{err}");
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = nanofiber();
        s.n_core = 0.9;
        assert!(matches!(solve_he11(&s), Err(Error::InvalidParameter { .. })));
        s = nanofiber();
        s.radius_m = -1.0;
        assert!(solve_he11(&s).is_err());
    }

    #[test]
    fn mode_intensity_rejects_negative_radius() {
        let m = solve_he11(&nanofiber()).unwrap();
        assert!(mode_intensity(&m, -1e-9).is_err());
    }

    #[test]
    fn deterministic() {
        let a = solve_he11(&nanofiber()).unwrap();
        let b = solve_he11(&nanofiber()).unwrap();
        assert_eq!(a.n_eff.to_bits(), b.n_eff.to_bits());
        assert_eq!(a.evanescent_fraction.to_bits(), b.evanescent_fraction.to_bits());
    }

    #[test]
    fn scan_is_linear_in_power() {
        let d: Vec<f64> = (0..12).map(|i| 250e-9 + 50e-9 * i as f64).collect();
        let s1 = surface_intensity_scan(LAMBDA, &d, 1e-9, 1.4525, 1.0).unwrap();
        let s2 = surface_intensity_scan(LAMBDA, &d, 2e-9, 1.4525, 1.0).unwrap();
        for (a, b) in s1.points.iter().zip(&s2.points) {
            assert!((b.surface_intensity / a.surface_intensity - 2.0).abs() < 1e-12);
        }
        assert_eq!(s1.argmax_diameter_m, s2.argmax_diameter_m);
    }

    #[test]
    fn scan_of_unguided_diameters_is_empty() {
        let err = surface_intensity_scan(LAMBDA, &[5e-9, 10e-9], 1.0, 1.4525, 1.0).unwrap_err();
        assert!(matches!(err, Error::EmptyScan));
    }
}
