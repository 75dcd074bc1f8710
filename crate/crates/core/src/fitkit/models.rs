use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::CS_GAMMA_NANOFIBER;
use crate::decoherence::efficiency_decay;
use crate::eit::{eit_transmission, LambdaScheme};
use crate::ensemble::{lorentzian_transmission, saturation_transmission, AbsorptionModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// Transmission vs probe power, `exp(−α₀L/(1+P/P_sat)^k)`.
    Saturation,
    /// Transmission vs detuning, `exp(−OD/(1+(2δ/Γ)²))`.
    LorentzianOd,
    /// Relative efficiency vs storage time.
    DecayLifetime,
    /// EIT transmission vs probe detuning.
    EitSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub unit: &'static str,
    /// Fitted in log space, which keeps it strictly positive.
    pub positive: bool,
}

const fn spec(name: &'static str, unit: &'static str) -> ParamSpec {
    ParamSpec { name, unit, positive: true }
}

const SATURATION: [ParamSpec; 3] = [spec("alpha0_l", "1"), spec("p_sat_w", "W"), spec("k_exp", "1")];
const LORENTZIAN: [ParamSpec; 2] = [spec("od", "1"), spec("gamma_rad_per_s", "rad/s")];
const DECAY: [ParamSpec; 2] = [spec("tau_d_s", "s"), spec("tau_t_s", "s")];
const EIT: [ParamSpec; 4] = [
    spec("od", "1"),
    spec("gamma_rad_per_s", "rad/s"),
    spec("gamma_gs_rad_per_s", "rad/s"),
    spec("rabi_rad_per_s", "rad/s"),
];

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Saturation, ModelId::LorentzianOd, ModelId::DecayLifetime, ModelId::EitSpectrum];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Saturation => "saturation",
            ModelId::LorentzianOd => "lorentzian_od",
            ModelId::DecayLifetime => "decay_lifetime",
            ModelId::EitSpectrum => "eit_spectrum",
        }
    }

    pub fn parameters(self) -> &'static [ParamSpec] {
        match self {
            ModelId::Saturation => &SATURATION,
            ModelId::LorentzianOd => &LORENTZIAN,
            ModelId::DecayLifetime => &DECAY,
            ModelId::EitSpectrum => &EIT,
        }
    }

    pub fn x_label(self) -> (&'static str, &'static str) {
        match self {
            ModelId::Saturation => ("power", "W"),
            ModelId::LorentzianOd | ModelId::EitSpectrum => ("detuning", "rad/s"),
            ModelId::DecayLifetime => ("storage_time", "s"),
        }
    }

    /// Parameters held fixed unless the caller says otherwise. The
    /// saturation exponent is poorly constrained next to α₀L and P_sat.
    pub fn default_frozen(self) -> &'static [&'static str] {
        match self {
            ModelId::Saturation => &["k_exp"],
            _ => &[],
        }
    }

    /// Reference operating point: the measured absorption and lifetime
    /// constants, and for the EIT spectrum the calibrated 1.6 mW point.
    pub fn reference_parameters(self) -> Vec<f64> {
        let m = AbsorptionModel::default();
        match self {
            ModelId::Saturation => vec![m.alpha0_l, m.p_sat_w, m.k_exp],
            ModelId::LorentzianOd => vec![m.od, m.gamma_rad_per_s],
            ModelId::DecayLifetime => vec![5.5e-6, 3.7e-6],
            ModelId::EitSpectrum => vec![3.0, CS_GAMMA_NANOFIBER, 4.4e6, 5.95e7],
        }
    }

    /// `n` evenly spaced abscissae spanning the informative range of the model.
    pub fn default_grid(self, n: usize) -> Vec<f64> {
        let (lo, hi) = match self {
            ModelId::Saturation => (0.0, 60e-9),
            ModelId::LorentzianOd | ModelId::EitSpectrum => (-4.0 * CS_GAMMA_NANOFIBER, 4.0 * CS_GAMMA_NANOFIBER),
            ModelId::DecayLifetime => (0.0, 15e-6),
        };
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn index_of(self, name: &str) -> Option<usize> {
        self.parameters().iter().position(|p| p.name == name)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Evaluate a registered model on `x`, delegating to the owning module.
pub fn evaluate_model(model: ModelId, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let n = model.parameters().len();
    if params.len() != n {
        return Err(Error::FitProblem(format!("{model} takes {n} parameters, got {}", params.len())));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::FitProblem("parameters must be finite".into()));
    }
    match model {
        ModelId::Saturation => {
            let m = AbsorptionModel { alpha0_l: params[0], p_sat_w: params[1], k_exp: params[2], ..AbsorptionModel::default() };
            Ok(x.iter().map(|&p| saturation_transmission(p, &m)).collect())
        }
        ModelId::LorentzianOd => {
            let m = AbsorptionModel { od: params[0], gamma_rad_per_s: params[1], ..AbsorptionModel::default() };
            Ok(x.iter().map(|&d| lorentzian_transmission(d, &m)).collect())
        }
        ModelId::DecayLifetime => x.iter().map(|&t| efficiency_decay(t, params[0], params[1])).collect(),
        ModelId::EitSpectrum => {
            let scheme = LambdaScheme { gamma_ge_rad_per_s: params[1], ..LambdaScheme::cesium_d2(params[2]) };
            Ok(x.iter().map(|&d| eit_transmission(d, params[0], &scheme, params[3])).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delegation_identities() {
        let od = ModelId::LorentzianOd.reference_parameters();
        assert!((evaluate_model(ModelId::LorentzianOd, &od, &[0.0]).unwrap()[0] - (-3.0f64).exp()).abs() < 1e-15);
        let decay = ModelId::DecayLifetime.reference_parameters();
        assert_eq!(evaluate_model(ModelId::DecayLifetime, &decay, &[0.0]).unwrap()[0], 1.0);
        let x = ModelId::EitSpectrum.default_grid(101);
        let lor = evaluate_model(ModelId::LorentzianOd, &od, &x).unwrap();
        let eit = evaluate_model(ModelId::EitSpectrum, &[3.0, od[1], 4.4e6, 0.0], &x).unwrap();
        for (a, b) in lor.iter().zip(&eit) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn names_round_trip() {
        for m in ModelId::ALL {
            assert_eq!(m.name().parse::<ModelId>().unwrap(), m);
            for f in m.default_frozen() {
                assert!(m.index_of(f).is_some());
            }
            assert_eq!(m.reference_parameters().len(), m.parameters().len());
        }
        assert!(matches!("voigt".parse::<ModelId>(), Err(Error::UnknownModel(_))));
        assert!(evaluate_model(ModelId::Saturation, &[1.0], &[0.0]).is_err());
    }
}
