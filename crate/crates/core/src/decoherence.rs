//! Memory lifetime: transit loss, motional and Zeeman dephasing of the stored
//! spin wave, and collapses/revivals under a bias magnetic field.
//!
//! Infinite lifetimes are returned as `f64::INFINITY`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_MAGNETON, BOLTZMANN, CS_D2_WAVELENGTH, CS_GF_GROUND, CS_MASS, PLANCK};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    pub temperature_k: f64,
    pub atom_mass_kg: f64,
    pub fiber_radius_m: f64,
    pub wavelength_m: f64,
    /// Angle between control and guided signal wave vectors.
    pub control_angle_rad: f64,
    pub zeeman_broadening_hz: f64,
    /// Transit constant; derived as `τ₁` when absent.
    pub tau_t_s: Option<f64>,
    /// Dephasing constant; derived from `τ₂` and `τ₃` when absent.
    pub tau_d_s: Option<f64>,
}

impl Default for DecoherenceParams {
    /// 200 µK cesium, 200 nm fiber radius, 13° control angle, 100 kHz
    /// inhomogeneous Zeeman width; both time constants derived.
    fn default() -> Self {
        Self {
            temperature_k: 200e-6,
            atom_mass_kg: CS_MASS,
            fiber_radius_m: 200e-9,
            wavelength_m: CS_D2_WAVELENGTH,
            control_angle_rad: 13f64.to_radians(),
            zeeman_broadening_hz: 100e3,
            tau_t_s: None,
            tau_d_s: None,
        }
    }
}

impl DecoherenceParams {
    /// Default physics with the time constants fixed to the measured decay
    /// fit, τ_D = 5.5 µs and τ_T = 3.7 µs.
    pub fn fitted() -> Self {
        Self { tau_t_s: Some(3.7e-6), tau_d_s: Some(5.5e-6), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("temperature_k", self.temperature_k),
            ("atom_mass_kg", self.atom_mass_kg),
            ("fiber_radius_m", self.fiber_radius_m),
            ("wavelength_m", self.wavelength_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.control_angle_rad >= 0.0 && self.control_angle_rad < PI) {
            return Err(Error::invalid("control_angle_rad", "must lie in [0, π)"));
        }
        if !(self.zeeman_broadening_hz >= 0.0) {
            return Err(Error::invalid("zeeman_broadening_hz", "must be non-negative"));
        }
        for (name, v) in [("tau_t_s", self.tau_t_s), ("tau_d_s", self.tau_d_s)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::invalid(name, "must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn thermal_velocity(&self) -> f64 {
        thermal_velocity(self.temperature_k, self.atom_mass_kg)
    }

    pub fn tau1(&self) -> f64 {
        transit_time(self.fiber_radius_m, self.thermal_velocity())
    }

    pub fn tau2(&self) -> f64 {
        motional_dephasing_time(self.wavelength_m, self.control_angle_rad, self.thermal_velocity())
    }

    pub fn tau3(&self) -> f64 {
        zeeman_dephasing_time(self.zeeman_broadening_hz)
    }

    pub fn tau_t(&self) -> f64 {
        self.tau_t_s.unwrap_or_else(|| self.tau1())
    }

    pub fn tau_d(&self) -> f64 {
        self.tau_d_s.unwrap_or_else(|| combined_dephasing(self.tau2(), self.tau3()))
    }
}

/// `√(k_B T/m)`.
pub fn thermal_velocity(temperature_k: f64, mass_kg: f64) -> f64 {
    (BOLTZMANN * temperature_k.max(0.0) / mass_kg).sqrt()
}

/// `τ₁ = 2r/v`.
pub fn transit_time(radius_m: f64, velocity: f64) -> f64 {
    2.0 * radius_m / velocity
}

/// `τ₂ = 1/(|Δk| v)` with `|Δk| = (4π/λ) sin(α/2)`. Copropagating beams
/// (α = 0) do not dephase.
pub fn motional_dephasing_time(wavelength_m: f64, angle_rad: f64, velocity: f64) -> f64 {
    let dk = 4.0 * PI / wavelength_m * (0.5 * angle_rad).sin().abs();
    let rate = dk * velocity;
    if rate == 0.0 { f64::INFINITY } else { 1.0 / rate }
}

/// `τ₃ = 1/Δν`, with Δν the inhomogeneous Zeeman width in Hz.
pub fn zeeman_dephasing_time(broadening_hz: f64) -> f64 {
    if broadening_hz == 0.0 { f64::INFINITY } else { 1.0 / broadening_hz }
}

/// `1/τ_D² = 1/τ₂² + 1/τ₃²`.
pub fn combined_dephasing(tau2: f64, tau3: f64) -> f64 {
    let inv = tau2.powi(-2) + tau3.powi(-2);
    if inv == 0.0 { f64::INFINITY } else { inv.sqrt().recip() }
}

/// Relative retrieval efficiency after storage time `t`:
/// `exp[−(t/τ_D)²/(1+(t/τ_T)²)] / (1+(t/τ_T)²)²`.
pub fn efficiency_decay(t: f64, tau_d: f64, tau_t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "storage time must be non-negative"));
    }
    if !(tau_d > 0.0 && tau_t > 0.0) {
        return Err(Error::invalid("tau", "time constants must be positive"));
    }
    let u = (t / tau_t).powi(2);
    let a = (t / tau_d).powi(2);
    Ok((-a / (1.0 + u)).exp() / ((1.0 + u) * (1.0 + u)))
}

/// Half of the Larmor period `h/(g_F μ_B B)`.
pub fn half_larmor_period(b_field_t: f64, g_f: f64) -> Result<f64> {
    let nu = larmor_frequency(b_field_t, g_f);
    if !(nu > 0.0) {
        return Err(Error::invalid("b_field_t", "field and g_F must be non-zero"));
    }
    Ok(0.5 / nu)
}

/// `|g_F| μ_B B / h` (Hz).
pub fn larmor_frequency(b_field_t: f64, g_f: f64) -> f64 {
    (g_f * BOHR_MAGNETON * b_field_t / PLANCK).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagneticScenario {
    pub b_field_t: f64,
    pub g_f: f64,
    /// `(m, weight)` pairs; weights sum to one.
    pub m_populations: Vec<(i32, f64)>,
}

impl MagneticScenario {
    /// Equal weights over the `F = 4` sublevels.
    pub fn flat(b_field_t: f64) -> Self {
        Self { b_field_t, g_f: CS_GF_GROUND, m_populations: (-4..=4).map(|m| (m, 1.0 / 9.0)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_field_t >= 0.0) {
            return Err(Error::invalid("b_field_t", "must be non-negative"));
        }
        if !self.g_f.is_finite() {
            return Err(Error::invalid("g_f", "must be finite"));
        }
        if self.m_populations.is_empty() {
            return Err(Error::invalid("m_populations", "at least one level is required"));
        }
        if self.m_populations.iter().any(|&(_, w)| !(w >= 0.0)) {
            return Err(Error::invalid("m_populations", "weights must be non-negative"));
        }
        let total: f64 = self.m_populations.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("m_populations", format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Rephasing factor `|Σ_m w_m e^{2πi·2m·ν_L t}|²`.
    ///
    /// The clock coherence between `|F=4,m⟩` and `|F=3,m⟩` precesses at
    /// `2m·ν_L` because the two manifolds have opposite g_F of equal
    /// magnitude, so all terms realign every half Larmor period.
    pub fn rephasing(&self, t: f64) -> f64 {
        let nu = larmor_frequency(self.b_field_t, self.g_f);
        let (mut re, mut im) = (0.0, 0.0);
        for &(m, w) in &self.m_populations {
            let phase = 2.0 * PI * 2.0 * m as f64 * nu * t;
            re += w * phase.cos();
            im += w * phase.sin();
        }
        re * re + im * im
    }
}

/// `η_rel(t)`: rephasing factor times [`efficiency_decay`].
pub fn revival_envelope(t_grid: &[f64], scenario: &MagneticScenario, params: &DecoherenceParams) -> Result<Vec<f64>> {
    scenario.validate()?;
    params.validate()?;
    let (tau_d, tau_t) = (params.tau_d(), params.tau_t());
    t_grid.iter().map(|&t| Ok(scenario.rephasing(t) * efficiency_decay(t, tau_d, tau_t)?)).collect()
}

/// Rephasing times in `(0, t_max]`: positive multiples of the half Larmor
/// period. Empty without a field.
pub fn revival_times(scenario: &MagneticScenario, t_max: f64) -> Vec<f64> {
    match half_larmor_period(scenario.b_field_t, scenario.g_f) {
        Ok(half) => (1..).map(|k| k as f64 * half).take_while(|&t| t <= t_max).collect(),
        Err(_) => Vec::new(),
    }
}

/// Interior local maxima of a sampled curve, refined by a parabola through
/// the three neighbouring samples. Plateaus are ignored.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut peaks = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c && b > c.min(a) {
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let h = 0.5 * (times[i + 1] - times[i - 1]);
            peaks.push(times[i] + shift.clamp(-1.0, 1.0) * h);
        }
    }
    peaks
}
