//! Λ-system electromagnetically induced transparency for the guided probe.
//!
//! The medium is characterized by a single resonant optical depth `od`; the
//! guided-mode overlap is folded into it. Spectral quantities come from the
//! weak-probe susceptibility, time-domain storage from [`propagation`].

mod propagation;

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{CS_D2_ISAT_ISOTROPIC, CS_D2_WAVELENGTH, CS_GAMMA_NANOFIBER, CS_HYPERFINE_HZ, SPEED_OF_LIGHT};
use crate::{Error, Result};

pub use propagation::{
    propagate_pulse, propagate_with_refinement_check, storage_efficiency, PropagationGrid, PropagationResult,
};

/// Ratio γ_gs/Γ above which the scheme is flagged as poorly suited to EIT.
const DECOHERENCE_WARN_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaScheme {
    /// Excited-state decay rate Γ (rad/s).
    pub gamma_ge_rad_per_s: f64,
    /// Ground-state coherence decay rate γ_gs (rad/s) with the control on.
    pub gamma_gs_rad_per_s: f64,
    /// Ground-state coherence decay rate with the control off (rad/s). The
    /// excess `γ_gs − γ_dark` is control-induced and scales with the
    /// instantaneous control intensity in the time-domain solver.
    #[serde(default)]
    pub gamma_dark_rad_per_s: f64,
    pub wavelength_m: f64,
    pub hyperfine_splitting_hz: f64,
}

impl LambdaScheme {
    /// Ground decoherence during the dark period is set to zero; see
    /// [`LambdaScheme::with_dark_decoherence`].
    pub fn cesium_d2(gamma_gs_rad_per_s: f64) -> Self {
        Self {
            gamma_ge_rad_per_s: CS_GAMMA_NANOFIBER,
            gamma_gs_rad_per_s,
            gamma_dark_rad_per_s: 0.0,
            wavelength_m: CS_D2_WAVELENGTH,
            hyperfine_splitting_hz: CS_HYPERFINE_HZ,
        }
    }

    pub fn with_dark_decoherence(mut self, gamma_dark_rad_per_s: f64) -> Self {
        self.gamma_dark_rad_per_s = gamma_dark_rad_per_s;
        self
    }

    /// Ground decoherence for a control envelope value `f ∈ [0, 1]`.
    pub fn ground_decoherence(&self, envelope: f64) -> f64 {
        let excess = self.gamma_gs_rad_per_s - self.gamma_dark_rad_per_s;
        self.gamma_dark_rad_per_s + excess * envelope * envelope
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_ge_rad_per_s > 0.0) {
            return Err(Error::invalid("gamma_ge_rad_per_s", "must be positive"));
        }
        if !(self.gamma_gs_rad_per_s >= 0.0) {
            return Err(Error::invalid("gamma_gs_rad_per_s", "must be non-negative"));
        }
        if !(self.gamma_dark_rad_per_s >= 0.0 && self.gamma_dark_rad_per_s <= self.gamma_gs_rad_per_s) {
            return Err(Error::invalid("gamma_dark_rad_per_s", "must lie in [0, γ_gs]"));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(Error::invalid("wavelength_m", "must be positive"));
        }
        if self.gamma_gs_rad_per_s > DECOHERENCE_WARN_RATIO * self.gamma_ge_rad_per_s {
            log::warn!(
                "ground-state decoherence γ_gs = {:.3e} rad/s is not small against Γ = {:.3e} rad/s",
                self.gamma_gs_rad_per_s,
                self.gamma_ge_rad_per_s
            );
        }
        Ok(())
    }
}

/// Time dependence of the control amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlEnvelope {
    Constant,
    /// Raised-cosine ramp down starting at `off_start_s`, dark for `storage_s`,
    /// raised-cosine ramp back up. Both ramps last `ramp_s`.
    Storage { off_start_s: f64, storage_s: f64, ramp_s: f64 },
}

impl ControlEnvelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ControlEnvelope::Constant => 1.0,
            ControlEnvelope::Storage { off_start_s, storage_s, ramp_s } => {
                let off_end = off_start_s + ramp_s;
                let on_start = off_end + storage_s;
                let on_end = on_start + ramp_s;
                if t <= off_start_s || t >= on_end {
                    1.0
                } else if t < off_end {
                    0.5 * (1.0 + (PI * (t - off_start_s) / ramp_s).cos())
                } else if t <= on_start {
                    0.0
                } else {
                    0.5 * (1.0 - (PI * (t - on_start) / ramp_s).cos())
                }
            }
        }
    }

    /// (end of switch-off, start of switch-on), if the control is switched.
    pub fn dark_interval(&self) -> Option<(f64, f64)> {
        match *self {
            ControlEnvelope::Constant => None,
            ControlEnvelope::Storage { off_start_s, storage_s, ramp_s } => {
                Some((off_start_s + ramp_s, off_start_s + ramp_s + storage_s))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    pub power_w: f64,
    /// 1/e² intensity radius.
    pub waist_m: f64,
    /// Angle between control beam and fiber axis.
    pub angle_rad: f64,
    /// Peak Rabi frequency Ω_c (rad/s).
    pub rabi_rad_per_s: f64,
    /// Control detuning from |s⟩→|e⟩ (rad/s); sets the two-photon offset.
    pub detuning_rad_per_s: f64,
    pub envelope: ControlEnvelope,
}

impl ControlField {
    /// Control beam whose Rabi frequency follows from its power via
    /// [`rabi_from_power`].
    pub fn from_power(
        power_w: f64,
        waist_m: f64,
        angle_rad: f64,
        gamma_rad_per_s: f64,
        calibration: f64,
        envelope: ControlEnvelope,
    ) -> Result<Self> {
        let mut field = Self { power_w, waist_m, angle_rad, rabi_rad_per_s: 0.0, detuning_rad_per_s: 0.0, envelope };
        field.rabi_rad_per_s = rabi_from_power(&field, gamma_rad_per_s, calibration)?;
        Ok(field)
    }

    pub fn rabi_at(&self, t: f64) -> f64 {
        self.rabi_rad_per_s * self.envelope.value(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseShape {
    /// Exponential rise up to the peak followed by a short raised-cosine fall.
    ExponentialRising,
    Gaussian,
    /// Flat top with raised-cosine edges.
    Square,
}

impl std::str::FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential-rising" | "exp" => Ok(PulseShape::ExponentialRising),
            "gaussian" => Ok(PulseShape::Gaussian),
            "square" => Ok(PulseShape::Square),
            other => Err(Error::invalid("shape", format!("unknown pulse shape `{other}`"))),
        }
    }
}

/// Fall time of the exponential pulse and edge width of the square pulse,
/// as a fraction of the FWHM.
const EDGE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePulse {
    pub mean_photon_number: f64,
    pub fwhm_s: f64,
    pub shape: PulseShape,
    /// One-photon detuning δ from |g⟩→|e⟩ (rad/s).
    pub detuning_rad_per_s: f64,
    /// Time of the intensity maximum (Gaussian, exponential) or centre (square).
    pub peak_time_s: f64,
}

impl ProbePulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number > 0.0) {
            return Err(Error::invalid("mean_photon_number", "must be positive"));
        }
        if !(self.fwhm_s > 0.0) {
            return Err(Error::invalid("fwhm_s", "must be positive"));
        }
        Ok(())
    }

    /// Rise constant of the exponential shape chosen so the full FWHM,
    /// including half the fall time, equals `fwhm_s`.
    fn rise_time(&self) -> f64 {
        self.fwhm_s * (1.0 - 0.5 * EDGE_FRACTION) / LN_2
    }

    /// Unnormalized intensity shape with unit maximum.
    fn shape_value(&self, t: f64) -> f64 {
        let dt = t - self.peak_time_s;
        match self.shape {
            PulseShape::Gaussian => {
                let sigma = self.fwhm_s / (2.0 * (2.0 * LN_2).sqrt());
                (-0.5 * (dt / sigma).powi(2)).exp()
            }
            PulseShape::ExponentialRising => {
                let fall = EDGE_FRACTION * self.fwhm_s;
                if dt <= 0.0 {
                    (dt / self.rise_time()).exp()
                } else if dt < fall {
                    0.5 * (1.0 + (PI * dt / fall).cos())
                } else {
                    0.0
                }
            }
            PulseShape::Square => {
                let edge = EDGE_FRACTION * self.fwhm_s;
                let x = dt.abs() - 0.5 * (self.fwhm_s - edge);
                if x <= 0.0 {
                    1.0
                } else if x < edge {
                    0.5 * (1.0 + (PI * x / edge).cos())
                } else {
                    0.0
                }
            }
        }
    }

    fn shape_integral(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian => self.fwhm_s * (PI / (4.0 * LN_2)).sqrt(),
            PulseShape::ExponentialRising => self.rise_time() + 0.5 * EDGE_FRACTION * self.fwhm_s,
            PulseShape::Square => self.fwhm_s,
        }
    }

    /// Photon flux (photons/s); integrates to `mean_photon_number`.
    pub fn flux(&self, t: f64) -> f64 {
        self.mean_photon_number * self.shape_value(t) / self.shape_integral()
    }

    /// Slowly varying field amplitude in √(photons/s), carrying the detuning phase.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        let phase = -self.detuning_rad_per_s * (t - self.peak_time_s);
        Complex64::from_polar(self.flux(t).sqrt(), phase)
    }

    /// Earliest time with non-negligible flux (below 1e-6 of peak before it).
    pub fn start_time(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian => {
                let sigma = self.fwhm_s / (2.0 * (2.0 * LN_2).sqrt());
                self.peak_time_s - 5.3 * sigma
            }
            PulseShape::ExponentialRising => self.peak_time_s - 13.8 * self.rise_time(),
            PulseShape::Square => self.peak_time_s - 0.5 * (self.fwhm_s + EDGE_FRACTION * self.fwhm_s),
        }
    }
}

/// Normalized linear susceptibility with a detuned control:
/// `χ̃ = (Γ/2)·i(γ − iδ₂) / [(Γ/2 − iδ)(γ − iδ₂) + Ω²/4]`, `δ₂ = δ − Δ_c`.
/// `Im χ̃` is the absorption in units of the resonant optical depth.
pub fn susceptibility_with_control_detuning(
    delta: f64,
    control_detuning: f64,
    scheme: &LambdaScheme,
    rabi: f64,
) -> Complex64 {
    let i = Complex64::i();
    let half_gamma = 0.5 * scheme.gamma_ge_rad_per_s;
    let spin = Complex64::new(scheme.gamma_gs_rad_per_s, -(delta - control_detuning));
    let optical = Complex64::new(half_gamma, -delta);
    half_gamma * i * spin / (optical * spin + 0.25 * rabi * rabi)
}

/// Susceptibility for a resonant control; see
/// [`susceptibility_with_control_detuning`].
pub fn susceptibility(delta: f64, scheme: &LambdaScheme, rabi: f64) -> Complex64 {
    susceptibility_with_control_detuning(delta, 0.0, scheme, rabi)
}

/// Steady-state intensity transmission `exp(−od·Im χ̃(δ))`.
pub fn eit_transmission(delta: f64, od: f64, scheme: &LambdaScheme, rabi: f64) -> f64 {
    (-od * susceptibility(delta, scheme, rabi).im).exp()
}

pub fn eit_spectrum(od: f64, scheme: &LambdaScheme, rabi: f64, deltas: &[f64]) -> Result<Vec<f64>> {
    if !(od > 0.0) {
        return Err(Error::invalid("od", "must be positive"));
    }
    scheme.validate()?;
    Ok(deltas.iter().map(|&d| eit_transmission(d, od, scheme, rabi)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupDelay {
    pub delay_s: f64,
    /// Group-velocity reduction `c·τ/L`.
    pub slowdown: f64,
    /// Resonant transmission of the window.
    pub transparency: f64,
    /// The window is nearly closed (T(0) < 0.1) and the delay is of limited use.
    pub low_transparency: bool,
}

/// Below this resonant transmission the group delay is flagged.
const LOW_TRANSPARENCY: f64 = 0.1;

/// Group delay `(od/2)·d Re χ̃/dδ` at δ = 0, in closed form:
/// `(od/2)(Γ/2)(Ω²/4 − γ²) / (Γγ/2 + Ω²/4)²`.
pub fn group_delay(od: f64, scheme: &LambdaScheme, rabi: f64, length_m: f64) -> Result<GroupDelay> {
    if !(rabi > 0.0) {
        return Err(Error::invalid("rabi", "a transparency window needs Ω_c > 0"));
    }
    if !(length_m > 0.0) {
        return Err(Error::invalid("length_m", "must be positive"));
    }
    let half_gamma = 0.5 * scheme.gamma_ge_rad_per_s;
    let g = scheme.gamma_gs_rad_per_s;
    let x = 0.25 * rabi * rabi;
    let d0 = half_gamma * g + x;
    let delay_s = 0.5 * od * half_gamma * (x - g * g) / (d0 * d0);
    let transparency = eit_transmission(0.0, od, scheme, rabi);
    let low_transparency = transparency < LOW_TRANSPARENCY;
    if low_transparency {
        log::warn!("EIT window nearly closed: T(0) = {transparency:.3e}");
    }
    Ok(GroupDelay { delay_s, slowdown: SPEED_OF_LIGHT * delay_s / length_m, transparency, low_transparency })
}

/// Ω_c = calibration·Γ·√(I/(2 I_sat)) with peak intensity I = 2P/(πw²).
pub fn rabi_from_power(field: &ControlField, gamma_rad_per_s: f64, calibration: f64) -> Result<f64> {
    if !(field.power_w >= 0.0) {
        return Err(Error::invalid("power_w", "must be non-negative"));
    }
    if !(field.waist_m > 0.0) {
        return Err(Error::invalid("waist_m", "must be positive"));
    }
    let intensity = 2.0 * field.power_w / (PI * field.waist_m * field.waist_m);
    Ok(calibration * gamma_rad_per_s * (intensity / (2.0 * CS_D2_ISAT_ISOTROPIC)).sqrt())
}

/// Anchors fixing the two unmeasured EIT constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchors {
    pub od: f64,
    pub gamma_ge_rad_per_s: f64,
    pub waist_m: f64,
    /// Control power at which the resonant transmission is `transparency`.
    pub transparency_power_w: f64,
    pub transparency: f64,
    /// Control power at which the group delay is `delay_s`.
    pub delay_power_w: f64,
    pub delay_s: f64,
}

impl Default for CalibrationAnchors {
    /// 75 % transparency at 1.6 mW, 60 ns delay at 0.5 mW, OD 3, 400 µm waist.
    fn default() -> Self {
        Self {
            od: 3.0,
            gamma_ge_rad_per_s: CS_GAMMA_NANOFIBER,
            waist_m: 400e-6,
            transparency_power_w: 1.6e-3,
            transparency: 0.75,
            delay_power_w: 0.5e-3,
            delay_s: 60e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EitCalibration {
    /// Dimensionless factor in [`rabi_from_power`].
    pub rabi_calibration: f64,
    pub gamma_gs_rad_per_s: f64,
}

/// Solve for (rabi calibration, γ_gs) so that both anchors hold at once.
///
/// The transparency anchor gives Ω² in closed form for each γ; the delay
/// anchor is then a one-dimensional root in γ, found by bisection.
pub fn calibrate(anchors: &CalibrationAnchors) -> Result<EitCalibration> {
    let a = anchors;
    if !(a.transparency > 0.0 && a.transparency < 1.0) {
        return Err(Error::invalid("transparency", "must lie in (0, 1)"));
    }
    let half_gamma = 0.5 * a.gamma_ge_rad_per_s;
    // Im χ̃(0) = (Γ/2)γ / ((Γ/2)γ + Ω²/4) = −ln T / od.
    let im_chi = -a.transparency.ln() / a.od;
    if im_chi >= 1.0 {
        return Err(Error::invalid("transparency", "below the two-level transmission e^{-od}"));
    }
    let power_ratio = a.delay_power_w / a.transparency_power_w;
    let scheme_for = |gamma: f64| LambdaScheme {
        gamma_ge_rad_per_s: a.gamma_ge_rad_per_s,
        gamma_gs_rad_per_s: gamma,
        wavelength_m: CS_D2_WAVELENGTH,
        gamma_dark_rad_per_s: 0.0,
        hyperfine_splitting_hz: CS_HYPERFINE_HZ,
    };
    let rabi_sq_at_anchor = |gamma: f64| 4.0 * half_gamma * gamma * (1.0 / im_chi - 1.0);
    let delay_at = |gamma: f64| {
        let rabi = (rabi_sq_at_anchor(gamma) * power_ratio).sqrt();
        group_delay(a.od, &scheme_for(gamma), rabi, 1.0).map(|g| g.delay_s).unwrap_or(f64::NAN)
    };
    // Delay falls monotonically from +∞ (γ→0) to negative values.
    let mut lo = 1e-6 * a.gamma_ge_rad_per_s;
    let mut hi = a.gamma_ge_rad_per_s;
    if !(delay_at(lo) > a.delay_s && delay_at(hi) < a.delay_s) {
        return Err(Error::Solver("calibration anchors are not simultaneously attainable".into()));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if delay_at(mid) > a.delay_s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let gamma = (lo * hi).sqrt();
    let rabi = rabi_sq_at_anchor(gamma).sqrt();
    let unit = ControlField {
        power_w: a.transparency_power_w,
        waist_m: a.waist_m,
        angle_rad: 0.0,
        rabi_rad_per_s: 0.0,
        detuning_rad_per_s: 0.0,
        envelope: ControlEnvelope::Constant,
    };
    let per_cal = rabi_from_power(&unit, a.gamma_ge_rad_per_s, 1.0)?;
    Ok(EitCalibration { rabi_calibration: rabi / per_cal, gamma_gs_rad_per_s: gamma })
}
