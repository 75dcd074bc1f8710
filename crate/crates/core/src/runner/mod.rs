//! Scenario catalog, run configuration, photon-counting statistics and CSV
//! output for the command-line front end.

mod config;
mod counting;
mod scenarios;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{Config, Override, DEFAULT_CONFIG};
pub use counting::{simulate_counting, CountingModel, CountingResult};
pub use scenarios::{optimize_storage_power, storage_run, StorageSetup};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Fig1b,
    Fig1c,
    Fig2,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig4a,
    Fig4b,
    Fig4c,
    ModeScan,
    Custom,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 11] = [
        ScenarioId::Fig1b,
        ScenarioId::Fig1c,
        ScenarioId::Fig2,
        ScenarioId::Fig3a,
        ScenarioId::Fig3b,
        ScenarioId::Fig3c,
        ScenarioId::Fig4a,
        ScenarioId::Fig4b,
        ScenarioId::Fig4c,
        ScenarioId::ModeScan,
        ScenarioId::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Fig1b => "fig1b",
            ScenarioId::Fig1c => "fig1c",
            ScenarioId::Fig2 => "fig2",
            ScenarioId::Fig3a => "fig3a",
            ScenarioId::Fig3b => "fig3b",
            ScenarioId::Fig3c => "fig3c",
            ScenarioId::Fig4a => "fig4a",
            ScenarioId::Fig4b => "fig4b",
            ScenarioId::Fig4c => "fig4c",
            ScenarioId::ModeScan => "mode_scan",
            ScenarioId::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        ScenarioId::ALL.into_iter().find(|id| id.name() == norm).ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// One requested run: which dataset, with which overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: ScenarioId,
    pub parameters: Vec<Override>,
    /// Seed for the counting simulation; physics paths draw no random numbers.
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
}

impl Scenario {
    pub fn new(id: ScenarioId) -> Self {
        Self { id, parameters: Vec::new(), seed: None, output_path: None }
    }

    pub fn with_override(mut self, key: &str, value: &str) -> Self {
        self.parameters.push(Override::new(key, value));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Named columns with units and the rows beneath them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self { columns: columns.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(), rows: Vec::new() }
    }

    pub fn push_column(&mut self, name: impl Into<String>, unit: impl Into<String>) {
        self.columns.push((name.into(), unit.into()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|(n, _)| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub type Summary = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub id: ScenarioId,
    pub table: Table,
    /// Headline scalars of the run.
    pub summary: Summary,
    pub config: Config,
    pub digest: String,
    pub seed: Option<u64>,
    /// Rendered CSV, identical to what is written to `output_path`.
    pub csv: String,
}

/// Resolve overrides, run the scenario and render its CSV. Writes the file
/// atomically when the scenario names an output path.
pub fn run_scenario(scenario: &Scenario, base: &Config) -> Result<RunOutput> {
    let config = base.with_overrides(&scenario.parameters)?;
    let (table, summary) =
        scenarios::run(scenario.id, &config, scenario.seed).map_err(|e| e.context(format!("scenario {}", scenario.id)))?;
    let digest = config.digest();
    let csv = render_csv(scenario.id, &table, &summary, &config, &digest, scenario.seed);
    if let Some(path) = &scenario.output_path {
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(RunOutput { id: scenario.id, table, summary, config, digest, seed: scenario.seed, csv })
}

/// 12 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn render_csv(id: ScenarioId, table: &Table, summary: &Summary, config: &Config, digest: &str, seed: Option<u64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scenario: {id}");
    let _ = writeln!(out, "# config_digest: {digest}");
    if let Some(seed) = seed {
        let _ = writeln!(out, "# seed: {seed}");
    }
    for (k, v) in summary {
        let _ = writeln!(out, "# summary.{k} = {v}");
    }
    for line in config.resolved_toml().lines().filter(|l| !l.trim().is_empty()) {
        let _ = writeln!(out, "# config: {line}");
    }
    let header: Vec<String> = table.columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
    let _ = writeln!(out, "{}", header.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| Error::invalid("output_path", "must name a file"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDoc {
    pub key: &'static str,
    pub unit: &'static str,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioInfo {
    pub id: ScenarioId,
    pub figure: &'static str,
    pub description: &'static str,
    /// Headline number the dataset is compared against, if any.
    pub target: Option<&'static str>,
    pub parameters: Vec<ParamDoc>,
}

/// Unit implied by a config key's suffix.
fn unit_of(key: &str) -> &'static str {
    const SUFFIXES: &[(&str, &str)] = &[
        ("_rad_per_s", "rad/s"),
        ("_per_m3", "1/m^3"),
        ("_hz", "Hz"),
        ("_rad", "rad"),
        ("_s", "s"),
        ("_w", "W"),
        ("_m", "m"),
        ("_t", "T"),
        ("_k", "K"),
    ];
    SUFFIXES.iter().find(|(s, _)| key.ends_with(s)).map_or("1", |&(_, u)| u)
}

fn docs(entries: &[(&'static str, &'static str)]) -> Vec<ParamDoc> {
    entries.iter().map(|&(key, description)| ParamDoc { key, unit: unit_of(key), description }).collect()
}

const STORAGE_PARAMS: &[(&str, &str)] = &[
    ("absorption.od", "resonant optical depth"),
    ("probe.fwhm_s", "probe pulse duration"),
    ("probe.shape", "exponential-rising, gaussian or square"),
    ("probe.mean_photon_number", "photons per probe pulse"),
    ("storage.off_start_s", "control ramp-down start relative to the probe peak"),
    ("storage.ramp_s", "control ramp duration"),
    ("storage.storage_s", "dark storage time"),
    ("storage.optimize_control_power", "scan the control power for maximum efficiency"),
    ("storage.control_power_w", "control power when not optimizing"),
    ("calibration.rabi_calibration", "Rabi frequency per sqrt of intensity, in units of Gamma"),
    ("calibration.gamma_gs_rad_per_s", "ground decoherence with the control on"),
    ("calibration.gamma_dark_rad_per_s", "ground decoherence with the control off"),
    ("grid.dt_s", "time step"),
    ("grid.z_steps", "number of spatial slices"),
];

/// Every scenario with its figure, description and the parameters it reads.
pub fn list_scenarios() -> Vec<ScenarioInfo> {
    ScenarioId::ALL
        .into_iter()
        .map(|id| {
            let (figure, description, target, params): (_, _, _, Vec<(&'static str, &'static str)>) = match id {
                ScenarioId::Fig1b => (
                    "Fig. 1b",
                    "transmission vs probe power in the saturation regime, with atom-number estimates",
                    Some("1500 atoms in the annulus; 2000 +/- 500 from the saturated absorbed power"),
                    vec![
                        ("absorption.alpha0_l", "unsaturated optical depth of the saturation law"),
                        ("absorption.p_sat_w", "saturation power"),
                        ("absorption.k_exp", "saturation exponent"),
                        ("absorption.power_max_w", "largest probe power"),
                        ("absorption.single_atom_power_w", "power scattered by one saturated atom"),
                        ("cloud.peak_density_per_m3", "cloud density"),
                        ("cloud.overlap_length_m", "fiber length inside the cloud"),
                        ("cloud.annulus_radii", "counted annulus width in fiber radii"),
                        ("absorption.points", "number of samples"),
                    ],
                ),
                ScenarioId::Fig1c => (
                    "Fig. 1c",
                    "weak-probe transmission vs detuning, fitted back to an optical depth",
                    Some("OD = 3"),
                    vec![
                        ("absorption.od", "resonant optical depth"),
                        ("physics.gamma_rad_per_s", "excited-state linewidth"),
                        ("absorption.detuning_span_rad_per_s", "half width of the detuning scan"),
                        ("absorption.points", "number of samples"),
                    ],
                ),
                ScenarioId::Fig2 => (
                    "Fig. 2",
                    "EIT transmission spectra at several control powers",
                    Some("75% transparency at 1.6 mW"),
                    vec![
                        ("control.powers_w", "control powers, one spectrum each"),
                        ("absorption.od", "resonant optical depth"),
                        ("calibration.rabi_calibration", "Rabi frequency per sqrt of intensity, in units of Gamma"),
                        ("calibration.gamma_gs_rad_per_s", "ground decoherence with the control on"),
                        ("control.waist_m", "control beam waist"),
                        ("absorption.detuning_span_rad_per_s", "half width of the detuning scan"),
                        ("absorption.points", "number of samples"),
                    ],
                ),
                ScenarioId::Fig3a => (
                    "Fig. 3a",
                    "slow-light pulses under a constant control at several powers",
                    Some("60 ns delay at 0.5 mW, about 3000-fold slowdown"),
                    vec![
                        ("control.powers_w", "control powers, one pulse each"),
                        ("control.delay_power_w", "power at which the delay is reported"),
                        ("slow_light.fwhm_s", "probe pulse duration"),
                        ("slow_light.shape", "pulse shape"),
                        ("slow_light.tail_s", "simulated time after the pulse peak"),
                        ("cloud.overlap_length_m", "medium length for the slowdown factor"),
                        ("absorption.od", "resonant optical depth"),
                        ("grid.dt_s", "time step"),
                        ("grid.z_steps", "number of spatial slices"),
                    ],
                ),
                ScenarioId::Fig3b => (
                    "Fig. 3b",
                    "storage and retrieval of a weak pulse, with counting statistics",
                    Some("efficiency 10%, signal-to-noise ratio 20"),
                    STORAGE_PARAMS
                        .iter()
                        .copied()
                        .chain([
                            ("storage.power_scan_min_w", "lowest control power scanned"),
                            ("storage.power_scan_max_w", "highest control power scanned"),
                            ("storage.power_scan_points", "log-spaced scan points"),
                            ("counting.background_per_window", "mean background counts per window"),
                            ("counting.n_shots", "number of simulated shots"),
                            ("counting.window_s", "read-out window"),
                        ])
                        .collect(),
                ),
                ScenarioId::Fig3c => (
                    "Fig. 3c",
                    "relative storage efficiency vs control polarization",
                    Some("efficiency largest for a control polarized along the fiber"),
                    STORAGE_PARAMS
                        .iter()
                        .copied()
                        .chain([("storage.polarization_points", "polarization angles from 0 to 180 degrees")])
                        .collect(),
                ),
                ScenarioId::Fig4a => (
                    "Fig. 4a",
                    "storage efficiency vs storage time with the derived or fitted time constants",
                    Some("tau_D = 5.5 +/- 1 us, tau_T = 3.7 +/- 0.5 us"),
                    vec![
                        ("cloud.temperature_k", "atom temperature"),
                        ("fiber.diameter_m", "fiber diameter"),
                        ("control.angle_rad", "angle between control and fiber"),
                        ("decoherence.zeeman_broadening_hz", "inhomogeneous Zeeman width"),
                        ("decoherence.use_fitted_constants", "use the fitted time constants"),
                        ("decoherence.fitted_tau_d_s", "fitted dephasing time"),
                        ("decoherence.fitted_tau_t_s", "fitted transit time"),
                        ("decoherence.t_max_s", "longest storage time"),
                        ("decoherence.points", "number of samples"),
                    ],
                ),
                ScenarioId::Fig4b | ScenarioId::Fig4c => (
                    if id == ScenarioId::Fig4b { "Fig. 4b" } else { "Fig. 4c" },
                    "collapse and revival of the efficiency under a bias magnetic field",
                    Some(if id == ScenarioId::Fig4b { "revivals every 3.5 us at 0.4 G" } else { "revivals every 2.35 us at 0.6 G" }),
                    vec![
                        (if id == ScenarioId::Fig4b { "magnetic.fig4b_b_field_t" } else { "magnetic.fig4c_b_field_t" }, "bias field"),
                        ("magnetic.g_f", "ground-state Lande factor"),
                        ("magnetic.m_weights", "relative Zeeman populations, m = -4..4"),
                        ("magnetic.t_max_s", "longest storage time"),
                        ("magnetic.points", "number of samples"),
                        ("decoherence.use_fitted_constants", "use the fitted time constants"),
                    ],
                ),
                ScenarioId::ModeScan => (
                    "Fig. 1a",
                    "guided-mode surface intensity and evanescent fraction vs fiber diameter",
                    Some("surface intensity maximal around 400 nm; 40% evanescent power"),
                    vec![
                        ("mode_scan.diameter_min_m", "smallest diameter"),
                        ("mode_scan.diameter_max_m", "largest diameter"),
                        ("mode_scan.points", "number of diameters"),
                        ("mode_scan.power_w", "guided power"),
                        ("physics.wavelength_m", "vacuum wavelength"),
                        ("physics.n_core", "core index"),
                        ("physics.n_clad", "cladding index"),
                        ("fiber.diameter_m", "diameter at which the evanescent fraction is reported"),
                    ],
                ),
                ScenarioId::Custom => (
                    "none",
                    "one storage run at a fixed control power, every knob overridable",
                    None,
                    STORAGE_PARAMS
                        .iter()
                        .copied()
                        .chain([("probe.detuning_rad_per_s", "one-photon probe detuning"), ("control.detuning_rad_per_s", "control detuning")])
                        .collect(),
                ),
            };
            ScenarioInfo { id, figure, description, target, parameters: docs(&params) }
        })
        .collect()
}
