use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const DEFAULT_CONFIG: &str = include_str!("default_config.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub physics: Physics,
    pub fiber: Fiber,
    pub cloud: Cloud,
    pub absorption: Absorption,
    pub calibration: Calibration,
    pub control: Control,
    pub slow_light: SlowLight,
    pub probe: Probe,
    pub storage: Storage,
    pub grid: Grid,
    pub decoherence: Decoherence,
    pub magnetic: Magnetic,
    pub counting: Counting,
    pub mode_scan: ModeScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub gamma_rad_per_s: f64,
    pub wavelength_m: f64,
    pub n_core: f64,
    pub n_clad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fiber {
    pub diameter_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cloud {
    pub peak_density_per_m3: f64,
    pub temperature_k: f64,
    pub overlap_length_m: f64,
    pub density_model: String,
    pub absorbing_shell_m: f64,
    pub annulus_radii: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Absorption {
    pub alpha0_l: f64,
    pub p_sat_w: f64,
    pub k_exp: f64,
    pub od: f64,
    pub single_atom_power_w: f64,
    pub power_max_w: f64,
    pub detuning_span_rad_per_s: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub rabi_calibration: f64,
    pub gamma_gs_rad_per_s: f64,
    pub gamma_dark_rad_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Control {
    pub waist_m: f64,
    pub angle_rad: f64,
    pub detuning_rad_per_s: f64,
    pub powers_w: Vec<f64>,
    pub delay_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowLight {
    pub fwhm_s: f64,
    pub shape: String,
    pub tail_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub mean_photon_number: f64,
    pub fwhm_s: f64,
    pub shape: String,
    pub detuning_rad_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    pub off_start_s: f64,
    pub ramp_s: f64,
    pub storage_s: f64,
    pub optimize_control_power: bool,
    pub control_power_w: f64,
    pub power_scan_min_w: f64,
    pub power_scan_max_w: f64,
    pub power_scan_points: usize,
    pub polarization_points: usize,
    pub target_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub dt_s: f64,
    pub z_steps: usize,
    pub tail_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decoherence {
    pub zeeman_broadening_hz: f64,
    pub use_fitted_constants: bool,
    pub fitted_tau_d_s: f64,
    pub fitted_tau_t_s: f64,
    pub t_max_s: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Magnetic {
    pub g_f: f64,
    pub fig4b_b_field_t: f64,
    pub fig4c_b_field_t: f64,
    pub m_weights: Vec<f64>,
    pub t_max_s: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counting {
    pub background_per_window: f64,
    pub n_shots: u64,
    pub window_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeScan {
    pub diameter_min_m: f64,
    pub diameter_max_m: f64,
    pub points: usize,
    pub power_w: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config::from_toml(DEFAULT_CONFIG).expect("embedded default config is valid")
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a full or partial config file; missing keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let user: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut base = default_table();
        merge(&mut base, user, "")?;
        Self::from_table(base)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    /// Apply `key=value` overrides in order.
    pub fn with_overrides(&self, overrides: &[Override]) -> Result<Self> {
        let mut table = self.to_table();
        for o in overrides {
            o.apply(&mut table)?;
        }
        Self::from_table(table)
    }

    /// Canonical TOML rendering, stable across runs.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `sha256:<hex>` of [`Config::resolved_toml`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.resolved_toml().as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    }

    /// Every `section.key` with its current value, in file order.
    pub fn keys(&self) -> Vec<(String, toml::Value)> {
        let mut out = Vec::new();
        for (section, value) in self.to_table() {
            if let toml::Value::Table(t) = value {
                for (k, v) in t {
                    out.push((format!("{section}.{k}"), v));
                }
            }
        }
        out
    }
}

fn default_table() -> toml::Table {
    toml::from_str(DEFAULT_CONFIG).expect("embedded default config parses")
}

fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str) -> Result<()> {
    for (k, v) in user {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path)?,
            (Some(slot), v) => {
                *slot = coerce(slot, v).map_err(|reason| Error::Override { key: path.clone(), reason })?;
            }
            (None, _) => return Err(Error::Override { key: path, reason: "unknown parameter".into() }),
        }
    }
    Ok(())
}

/// Unit aliases accepted in override keys: `(alias suffix, canonical suffix, factor)`.
const UNIT_ALIASES: &[(&str, &str, f64)] = &[
    ("_ns", "_s", 1e-9),
    ("_us", "_s", 1e-6),
    ("_ms", "_s", 1e-3),
    ("_nw", "_w", 1e-9),
    ("_uw", "_w", 1e-6),
    ("_mw", "_w", 1e-3),
    ("_nm", "_m", 1e-9),
    ("_um", "_m", 1e-6),
    ("_mm", "_m", 1e-3),
    ("_khz", "_hz", 1e3),
    ("_mhz", "_hz", 1e6),
    ("_khz", "_rad_per_s", 2.0 * PI * 1e3),
    ("_mhz", "_rad_per_s", 2.0 * PI * 1e6),
    ("_mg", "_t", 1e-7),
    ("_g", "_t", 1e-4),
    ("_deg", "_rad", PI / 180.0),
    ("_uk", "_k", 1e-6),
];

/// One `section.key=value` assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl std::str::FromStr for Override {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Override { key: s.to_string(), reason: "expected key=value".into() })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Override { key: key.to_string(), reason: "empty key or value".into() });
        }
        Ok(Override { key: key.to_string(), value: value.to_string() })
    }
}

impl Override {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self { key: key.into(), value: value.into() }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Override { key: self.key.clone(), reason: reason.into() }
    }

    fn apply(&self, table: &mut toml::Table) -> Result<()> {
        let (section, name) = self.key.split_once('.').ok_or_else(|| self.err("expected section.key"))?;
        let section_table = match table.get_mut(section) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(self.err(format!("unknown section `{section}`"))),
        };
        let (canonical, factor) = resolve_key(section_table, name).ok_or_else(|| self.err("unknown parameter"))?;
        let parsed = parse_value(&self.value);
        let scaled = if factor == 1.0 { parsed } else { scale(parsed, factor).map_err(|r| self.err(r))? };
        let slot = section_table.get_mut(&canonical).expect("resolved key exists");
        *slot = coerce(slot, scaled).map_err(|r| self.err(r))?;
        Ok(())
    }
}

fn resolve_key(section: &toml::Table, name: &str) -> Option<(String, f64)> {
    if section.contains_key(name) {
        return Some((name.to_string(), 1.0));
    }
    UNIT_ALIASES.iter().find_map(|&(alias, canonical, factor)| {
        let base = name.strip_suffix(alias)?;
        let key = format!("{base}{canonical}");
        section.contains_key(&key).then_some((key, factor))
    })
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn scale(v: toml::Value, factor: f64) -> std::result::Result<toml::Value, String> {
    match v {
        toml::Value::Float(x) => Ok(toml::Value::Float(x * factor)),
        toml::Value::Integer(i) => Ok(toml::Value::Float(i as f64 * factor)),
        toml::Value::Array(a) => a.into_iter().map(|x| scale(x, factor)).collect::<std::result::Result<Vec<_>, _>>().map(toml::Value::Array),
        other => Err(format!("expected a number, got `{other}`")),
    }
}

/// Convert `new` to the type of `current`.
fn coerce(current: &toml::Value, new: toml::Value) -> std::result::Result<toml::Value, String> {
    use toml::Value as V;
    match (current, new) {
        (V::Float(_), V::Float(x)) => Ok(V::Float(x)),
        (V::Float(_), V::Integer(i)) => Ok(V::Float(i as f64)),
        (V::Integer(_), V::Integer(i)) => Ok(V::Integer(i)),
        (V::Integer(_), V::Float(x)) if x.fract() == 0.0 && x.abs() < 9e15 => Ok(V::Integer(x as i64)),
        (V::Boolean(_), V::Boolean(b)) => Ok(V::Boolean(b)),
        (V::String(_), V::String(s)) => Ok(V::String(s)),
        (V::Array(cur), V::Array(items)) => {
            let proto = cur.first().cloned().unwrap_or(V::Float(0.0));
            items.into_iter().map(|x| coerce(&proto, x)).collect::<std::result::Result<Vec<_>, _>>().map(V::Array)
        }
        (cur, new) => Err(format!("expected {}, got `{new}`", cur.type_str())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eit::{calibrate, CalibrationAnchors};

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        let again = Config::from_toml(&c.resolved_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.digest(), again.digest());
        assert!(c.digest().starts_with("sha256:") && c.digest().len() == 7 + 64);
    }

    #[test]
    fn stored_calibration_matches_solver() {
        let c = Config::default();
        let anchors = CalibrationAnchors {
            od: c.absorption.od,
            gamma_ge_rad_per_s: c.physics.gamma_rad_per_s,
            waist_m: c.control.waist_m,
            ..CalibrationAnchors::default()
        };
        let cal = calibrate(&anchors).unwrap();
        assert!((cal.rabi_calibration - c.calibration.rabi_calibration).abs() < 1e-12);
        assert!((cal.gamma_gs_rad_per_s - c.calibration.gamma_gs_rad_per_s).abs() < 1e-6);
    }

    #[test]
    fn overrides_with_units() {
        let c = Config::default();
        let o: Vec<Override> = ["storage.ramp_ns=10", "physics.gamma_mhz=5.2", "magnetic.fig4b_b_field_g=0.5", "control.powers_mw=[0.5, 1]", "probe.shape=gaussian", "grid.z_steps=80", "storage.optimize_control_power=false"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let r = c.with_overrides(&o).unwrap();
        assert!((r.storage.ramp_s - 1e-8).abs() < 1e-20);
        assert!((r.physics.gamma_rad_per_s - 2.0 * PI * 5.2e6).abs() < 1e-6);
        assert!((r.magnetic.fig4b_b_field_t - 5e-5).abs() < 1e-18);
        assert_eq!(r.control.powers_w, vec![0.5e-3, 1e-3]);
        assert_eq!(r.probe.shape, "gaussian");
        assert_eq!(r.grid.z_steps, 80);
        assert!(!r.storage.optimize_control_power);
        assert_ne!(r.digest(), c.digest());
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let c = Config::default();
        for bad in ["storage.nope=1", "nosection.x=1", "grid.z_steps=1.5", "storage.ramp_s=fast", "storage.optimize_control_power=3", "probe.shape_ns=3"] {
            let o: Override = bad.parse().unwrap();
            assert!(matches!(c.with_overrides(&[o]), Err(Error::Override { .. })), "{bad}");
        }
        assert!("novalue".parse::<Override>().is_err());
        assert!("a=".parse::<Override>().is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[absorption]\nod = 4.5\n").unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.absorption.od, 4.5);
        assert_eq!(c.fiber, Config::default().fiber);
        std::fs::write(&path, "[absorption]\nodd = 4.5\n").unwrap();
        assert!(Config::load(&path).is_err());
    }

    #[test]
    fn keys_are_listed() {
        let keys = Config::default().keys();
        assert!(keys.iter().any(|(k, _)| k == "storage.ramp_s"));
        assert!(keys.iter().all(|(k, _)| k.contains('.')));
    }
}
