//! Cold-atom cloud around the nanofiber: radial density, atom-number
//! estimates, and the empirical absorption laws used to characterize the
//! ensemble (power saturation and the resonant Lorentzian optical depth).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, CS_GAMMA_NANOFIBER, CS_SILICA_C3, NANOFIBER_WAIST_LENGTH};
use crate::quad::Composite;
use crate::waveguide::FiberSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityModel {
    /// Constant density down to the fiber surface.
    #[default]
    Uniform,
    /// Surface-depleted profile `n₀·exp(−C₃/((ρ−r)³ k_B T))`: the fraction of
    /// atoms that survive the van der Waals pull toward the surface at
    /// temperature T. Zero inside an optional absorbing shell.
    SurfaceDepleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    pub peak_density_per_m3: f64,
    pub temperature_k: f64,
    pub overlap_length_m: f64,
    /// Van der Waals coefficient C₃ (J·m³).
    pub c3_jm3: f64,
    pub density_model: DensityModel,
    /// Distance from the surface within which atoms are lost outright (m).
    pub absorbing_shell_m: f64,
}

impl CloudSpec {
    /// 10¹¹ cm⁻³ MOT at 200 µK overlapping 5 mm of fiber, uniform profile.
    pub fn typical_mot() -> Self {
        Self {
            peak_density_per_m3: 1e17,
            temperature_k: 200e-6,
            overlap_length_m: 5e-3,
            c3_jm3: CS_SILICA_C3,
            density_model: DensityModel::Uniform,
            absorbing_shell_m: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_density_per_m3 > 0.0) {
            return Err(Error::invalid("peak_density_per_m3", "must be positive"));
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::invalid("temperature_k", "must be positive"));
        }
        if !(self.overlap_length_m > 0.0 && self.overlap_length_m <= NANOFIBER_WAIST_LENGTH) {
            return Err(Error::invalid("overlap_length_m", "must lie in (0, 9 mm]"));
        }
        if !(self.c3_jm3 >= 0.0) || !(self.absorbing_shell_m >= 0.0) {
            return Err(Error::invalid("c3_jm3", "C3 and absorbing shell must be non-negative"));
        }
        Ok(())
    }

    /// Length scale `(C₃/k_BT)^{1/3}` over which the depleted profile recovers.
    pub fn depletion_length_m(&self) -> f64 {
        (self.c3_jm3 / (BOLTZMANN * self.temperature_k)).cbrt()
    }
}

/// Atom number density at radius `rho` from the fiber axis (1/m³).
pub fn density_profile(cloud: &CloudSpec, fiber: &FiberSpec, rho: f64) -> Result<f64> {
    if !(rho >= fiber.radius_m) {
        return Err(Error::Domain(format!(
            "ρ = {rho:e} m lies inside the fiber (radius {:e} m)",
            fiber.radius_m
        )));
    }
    Ok(density_unchecked(cloud, fiber.radius_m, rho))
}

fn density_unchecked(cloud: &CloudSpec, radius: f64, rho: f64) -> f64 {
    let n0 = cloud.peak_density_per_m3;
    let gap = rho - radius;
    match cloud.density_model {
        // The surface itself is always empty.
        _ if gap <= 0.0 => 0.0,
        DensityModel::Uniform => n0,
        DensityModel::SurfaceDepleted => {
            if gap <= cloud.absorbing_shell_m {
                return 0.0;
            }
            let ell = cloud.depletion_length_m();
            if ell == 0.0 {
                return n0;
            }
            n0 * (-(ell / gap).powi(3)).exp()
        }
    }
}

/// Number of atoms in the annulus `r ≤ ρ ≤ r(1 + shell)` over the overlap length.
pub fn effective_atom_number(cloud: &CloudSpec, fiber: &FiberSpec, shell_width_in_radii: f64) -> Result<f64> {
    cloud.validate()?;
    if !(shell_width_in_radii >= 0.0) {
        return Err(Error::invalid("shell_width_in_radii", "must be non-negative"));
    }
    let r = fiber.radius_m;
    let outer = r * (1.0 + shell_width_in_radii);
    if shell_width_in_radii == 0.0 {
        return Ok(0.0);
    }
    let per_length = match cloud.density_model {
        DensityModel::Uniform => cloud.peak_density_per_m3 * PI * (outer * outer - r * r),
        DensityModel::SurfaceDepleted => Composite::new(16, 128)
            .integrate(r, outer, |rho| density_unchecked(cloud, r, rho) * 2.0 * PI * rho),
    };
    Ok(per_length * cloud.overlap_length_m)
}

/// Atom number inferred from the saturated absorbed power, `N = P_abs / p`.
pub fn atom_number_from_absorption(p_abs_w: f64, p_single_w: f64) -> Result<f64> {
    if !(p_abs_w >= 0.0) {
        return Err(Error::invalid("p_abs_w", "must be non-negative"));
    }
    if !(p_single_w > 0.0) {
        return Err(Error::invalid("p_single_w", "must be positive"));
    }
    Ok(p_abs_w / p_single_w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionModel {
    /// Resonant small-signal opacity α₀L of the saturation law.
    pub alpha0_l: f64,
    pub p_sat_w: f64,
    pub k_exp: f64,
    pub gamma_rad_per_s: f64,
    pub od: f64,
}

impl Default for AbsorptionModel {
    /// P_sat = 1.3 nW with P_abs = α₀L·P_sat = 8 nW, k = 1, OD = 3, Γ = 2π·6.8 MHz.
    fn default() -> Self {
        Self { alpha0_l: 8.0 / 1.3, p_sat_w: 1.3e-9, k_exp: 1.0, gamma_rad_per_s: CS_GAMMA_NANOFIBER, od: 3.0 }
    }
}

impl AbsorptionModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha0_l", self.alpha0_l),
            ("p_sat_w", self.p_sat_w),
            ("k_exp", self.k_exp),
            ("gamma_rad_per_s", self.gamma_rad_per_s),
            ("od", self.od),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    /// Power absorbed in the saturated regime, `α₀L·P_sat`.
    pub fn saturated_absorbed_power_w(&self) -> f64 {
        self.alpha0_l * self.p_sat_w
    }
}

/// `T = exp(−α₀L / (1 + P/P_sat)^k)`.
pub fn saturation_transmission(p_w: f64, model: &AbsorptionModel) -> f64 {
    let p = p_w.max(0.0);
    (-model.alpha0_l / (1.0 + p / model.p_sat_w).powf(model.k_exp)).exp()
}

/// `T(δ) = exp(−OD / (1 + (2δ/Γ)²))`.
pub fn lorentzian_transmission(delta_rad_per_s: f64, model: &AbsorptionModel) -> f64 {
    let x = 2.0 * delta_rad_per_s / model.gamma_rad_per_s;
    (-model.od / (1.0 + x * x)).exp()
}
