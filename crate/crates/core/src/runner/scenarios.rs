use rayon::prelude::*;
use serde_json::json;

use super::config::Config;
use super::counting::{simulate_counting, CountingModel};
use super::{ScenarioId, Summary, Table};
use crate::constants::{CS_MASS, CS_SILICA_C3};
use crate::decoherence::{
    efficiency_decay, half_larmor_period, local_maxima, revival_envelope, revival_times, DecoherenceParams, MagneticScenario,
};
use crate::eit::{
    eit_spectrum, group_delay, propagate_pulse, ControlEnvelope, ControlField, LambdaScheme, ProbePulse, PropagationGrid,
    PropagationResult, PulseShape,
};
use crate::ensemble::{
    atom_number_from_absorption, effective_atom_number, lorentzian_transmission, saturation_transmission, AbsorptionModel,
    CloudSpec, DensityModel,
};
use crate::fitkit::{fit, FitData, FitProblem, ModelId};
use crate::waveguide::{solve_he11, surface_intensity_scan, FiberSpec};
use crate::{Error, Result};

pub(super) fn run(id: ScenarioId, c: &Config, seed: Option<u64>) -> Result<(Table, Summary)> {
    match id {
        ScenarioId::Fig1b => fig1b(c),
        ScenarioId::Fig1c => fig1c(c),
        ScenarioId::Fig2 => fig2(c),
        ScenarioId::Fig3a => fig3a(c),
        ScenarioId::Fig3b => fig3b(c, seed.unwrap_or(0)),
        ScenarioId::Fig3c => fig3c(c),
        ScenarioId::Fig4a => fig4a(c),
        ScenarioId::Fig4b => fig4bc(c, c.magnetic.fig4b_b_field_t),
        ScenarioId::Fig4c => fig4bc(c, c.magnetic.fig4c_b_field_t),
        ScenarioId::ModeScan => mode_scan(c),
        ScenarioId::Custom => custom(c),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::invalid("points", "at least one point is required")),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn fiber(c: &Config) -> FiberSpec {
    FiberSpec {
        radius_m: 0.5 * c.fiber.diameter_m,
        wavelength_m: c.physics.wavelength_m,
        n_core: c.physics.n_core,
        n_clad: c.physics.n_clad,
    }
}

fn cloud(c: &Config) -> Result<CloudSpec> {
    let density_model = match c.cloud.density_model.as_str() {
        "uniform" => DensityModel::Uniform,
        "surface_depleted" => DensityModel::SurfaceDepleted,
        other => return Err(Error::invalid("density_model", format!("unknown density model `{other}`"))),
    };
    Ok(CloudSpec {
        peak_density_per_m3: c.cloud.peak_density_per_m3,
        temperature_k: c.cloud.temperature_k,
        overlap_length_m: c.cloud.overlap_length_m,
        c3_jm3: CS_SILICA_C3,
        density_model,
        absorbing_shell_m: c.cloud.absorbing_shell_m,
    })
}

fn absorption(c: &Config) -> AbsorptionModel {
    AbsorptionModel {
        alpha0_l: c.absorption.alpha0_l,
        p_sat_w: c.absorption.p_sat_w,
        k_exp: c.absorption.k_exp,
        gamma_rad_per_s: c.physics.gamma_rad_per_s,
        od: c.absorption.od,
    }
}

fn scheme(c: &Config) -> LambdaScheme {
    LambdaScheme {
        gamma_ge_rad_per_s: c.physics.gamma_rad_per_s,
        wavelength_m: c.physics.wavelength_m,
        ..LambdaScheme::cesium_d2(c.calibration.gamma_gs_rad_per_s)
    }
    .with_dark_decoherence(c.calibration.gamma_dark_rad_per_s)
}

fn control(c: &Config, power_w: f64, envelope: ControlEnvelope) -> Result<ControlField> {
    let mut field = ControlField::from_power(
        power_w,
        c.control.waist_m,
        c.control.angle_rad,
        c.physics.gamma_rad_per_s,
        c.calibration.rabi_calibration,
        envelope,
    )?;
    field.detuning_rad_per_s = c.control.detuning_rad_per_s;
    Ok(field)
}

fn decoherence_params(c: &Config) -> DecoherenceParams {
    let fitted = c.decoherence.use_fitted_constants;
    DecoherenceParams {
        temperature_k: c.cloud.temperature_k,
        atom_mass_kg: CS_MASS,
        fiber_radius_m: 0.5 * c.fiber.diameter_m,
        wavelength_m: c.physics.wavelength_m,
        control_angle_rad: c.control.angle_rad,
        zeeman_broadening_hz: c.decoherence.zeeman_broadening_hz,
        tau_t_s: fitted.then_some(c.decoherence.fitted_tau_t_s),
        tau_d_s: fitted.then_some(c.decoherence.fitted_tau_d_s),
    }
}

fn detunings(c: &Config) -> Result<Vec<f64>> {
    let span = c.absorption.detuning_span_rad_per_s;
    linspace(-span, span, c.absorption.points)
}

fn fig1b(c: &Config) -> Result<(Table, Summary)> {
    let model = absorption(c);
    model.validate()?;
    let mut table = Table::new(&[("probe_power", "W"), ("transmission", "1"), ("absorbed_power", "W")]);
    for p in linspace(0.0, c.absorption.power_max_w, c.absorption.points)? {
        let t = saturation_transmission(p, &model);
        table.rows.push(vec![p, t, p * (1.0 - t)]);
    }
    let p_abs = model.saturated_absorbed_power_w();
    let mut s = Summary::new();
    s.insert("saturated_absorbed_power_w".into(), json!(p_abs));
    s.insert("atom_number_from_absorption".into(), json!(atom_number_from_absorption(p_abs, c.absorption.single_atom_power_w)?));
    s.insert("atom_number_annulus".into(), json!(effective_atom_number(&cloud(c)?, &fiber(c), c.cloud.annulus_radii)?));
    Ok((table, s))
}

fn fig1c(c: &Config) -> Result<(Table, Summary)> {
    let model = absorption(c);
    model.validate()?;
    let x = detunings(c)?;
    let y: Vec<f64> = x.iter().map(|&d| lorentzian_transmission(d, &model)).collect();
    let mut table = Table::new(&[("detuning", "rad/s"), ("transmission", "1")]);
    table.rows = x.iter().zip(&y).map(|(&a, &b)| vec![a, b]).collect();
    let guess = vec![0.7 * model.od, 1.3 * model.gamma_rad_per_s];
    let result = fit(&FitProblem::new(ModelId::LorentzianOd, FitData::new(x, y), guess))?;
    let mut s = Summary::new();
    s.insert("fitted_od".into(), json!(result.parameters[0]));
    s.insert("fitted_od_sigma".into(), json!(result.uncertainties[0]));
    s.insert("fitted_gamma_rad_per_s".into(), json!(result.parameters[1]));
    s.insert("fit_converged".into(), json!(result.converged));
    Ok((table, s))
}

fn mw_label(power_w: f64) -> String {
    format!("{:.3}mW", power_w * 1e3)
}

fn fig2(c: &Config) -> Result<(Table, Summary)> {
    let deltas = detunings(c)?;
    let scheme = scheme(c);
    let od = c.absorption.od;
    let spectra: Vec<(f64, f64, Vec<f64>)> = c
        .control
        .powers_w
        .par_iter()
        .map(|&p| {
            let rabi = control(c, p, ControlEnvelope::Constant)?.rabi_rad_per_s;
            Ok((p, rabi, eit_spectrum(od, &scheme, rabi, &deltas)?))
        })
        .collect::<Result<_>>()?;
    let no_control = eit_spectrum(od, &scheme, 0.0, &deltas)?;
    let mut table = Table::new(&[("detuning", "rad/s"), ("transmission_no_control", "1")]);
    for (p, _, _) in &spectra {
        table.push_column(format!("transmission_{}", mw_label(*p)), "1");
    }
    for (i, &d) in deltas.iter().enumerate() {
        let mut row = vec![d, no_control[i]];
        row.extend(spectra.iter().map(|(_, _, t)| t[i]));
        table.rows.push(row);
    }
    let mut s = Summary::new();
    s.insert("control_powers_w".into(), json!(spectra.iter().map(|x| x.0).collect::<Vec<_>>()));
    s.insert("rabi_rad_per_s".into(), json!(spectra.iter().map(|x| x.1).collect::<Vec<_>>()));
    let resonant: Vec<f64> = spectra.iter().map(|x| eit_spectrum(od, &scheme, x.1, &[0.0]).map(|v| v[0])).collect::<Result<_>>()?;
    s.insert("resonant_transmission".into(), json!(resonant));
    Ok((table, s))
}

fn fig3a(c: &Config) -> Result<(Table, Summary)> {
    let shape: PulseShape = c.slow_light.shape.parse()?;
    let probe = ProbePulse {
        mean_photon_number: c.probe.mean_photon_number,
        fwhm_s: c.slow_light.fwhm_s,
        shape,
        detuning_rad_per_s: c.probe.detuning_rad_per_s,
        peak_time_s: 0.0,
    };
    let grid = PropagationGrid { t_start_s: probe.start_time(), t_end_s: c.slow_light.tail_s, dt_s: c.grid.dt_s, z_steps: c.grid.z_steps };
    let scheme = scheme(c);
    let od = c.absorption.od;
    let mut powers = c.control.powers_w.clone();
    let delay_index = match powers.iter().position(|&p| p == c.control.delay_power_w) {
        Some(i) => i,
        None => {
            powers.push(c.control.delay_power_w);
            powers.len() - 1
        }
    };
    let runs: Vec<(ControlField, PropagationResult)> = powers
        .par_iter()
        .map(|&p| {
            let field = control(c, p, ControlEnvelope::Constant)?;
            let r = propagate_pulse(&probe, &field, od, &scheme, &grid)?;
            Ok((field, r))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[("time", "s"), ("input_flux", "1/s")]);
    let listed = c.control.powers_w.len();
    for p in &powers[..listed] {
        table.push_column(format!("output_flux_{}", mw_label(*p)), "1/s");
    }
    let times = &runs[0].1.times_s;
    for (i, &t) in times.iter().enumerate() {
        let mut row = vec![t, runs[0].1.reference_flux[i]];
        row.extend(runs[..listed].iter().map(|(_, r)| r.output_flux[i]));
        table.rows.push(row);
    }
    let (field, run) = &runs[delay_index];
    let analytic = group_delay(od, &scheme, field.rabi_rad_per_s, c.cloud.overlap_length_m)?;
    let mut s = Summary::new();
    s.insert("delay_power_w".into(), json!(c.control.delay_power_w));
    s.insert("analytic_delay_s".into(), json!(analytic.delay_s));
    s.insert("centroid_delay_s".into(), json!(run.group_delay_s));
    s.insert("slowdown".into(), json!(analytic.slowdown));
    s.insert("transmission".into(), json!(run.transmission));
    s.insert("low_transparency".into(), json!(analytic.low_transparency));
    Ok((table, s))
}

/// Probe, control timing, grid and medium of a storage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageSetup {
    pub probe: ProbePulse,
    pub envelope: ControlEnvelope,
    pub grid: PropagationGrid,
    pub scheme: LambdaScheme,
    pub od: f64,
}

impl StorageSetup {
    /// Probe peak at t = 0; the simulation runs from the probe onset to
    /// `grid.tail_s` after the control is fully back on.
    pub fn from_config(c: &Config) -> Result<Self> {
        let probe = ProbePulse {
            mean_photon_number: c.probe.mean_photon_number,
            fwhm_s: c.probe.fwhm_s,
            shape: c.probe.shape.parse()?,
            detuning_rad_per_s: c.probe.detuning_rad_per_s,
            peak_time_s: 0.0,
        };
        let st = &c.storage;
        let envelope = ControlEnvelope::Storage { off_start_s: st.off_start_s, storage_s: st.storage_s, ramp_s: st.ramp_s };
        let t_end = st.off_start_s + 2.0 * st.ramp_s + st.storage_s + c.grid.tail_s;
        let grid = PropagationGrid { t_start_s: probe.start_time(), t_end_s: t_end, dt_s: c.grid.dt_s, z_steps: c.grid.z_steps };
        Ok(Self { probe, envelope, grid, scheme: scheme(c), od: c.absorption.od })
    }
}

/// One storage sequence at `power_w`.
pub fn storage_run(c: &Config, power_w: f64) -> Result<PropagationResult> {
    let setup = StorageSetup::from_config(c)?;
    let field = control(c, power_w, setup.envelope)?;
    propagate_pulse(&setup.probe, &field, setup.od, &setup.scheme, &setup.grid)
}

/// Scan the control power over the configured log-spaced range and keep the
/// most efficient run. Returns the chosen power, its run and the whole scan.
pub fn optimize_storage_power(c: &Config) -> Result<(f64, PropagationResult, Vec<(f64, f64)>)> {
    let st = &c.storage;
    if !(st.power_scan_min_w > 0.0 && st.power_scan_max_w >= st.power_scan_min_w) {
        return Err(Error::invalid("power_scan_min_w", "scan range must be positive and ordered"));
    }
    let n = st.power_scan_points.max(1);
    let ratio = st.power_scan_max_w / st.power_scan_min_w;
    let powers: Vec<f64> =
        (0..n).map(|i| if n == 1 { st.power_scan_min_w } else { st.power_scan_min_w * ratio.powf(i as f64 / (n - 1) as f64) }).collect();
    let runs: Vec<(f64, PropagationResult)> =
        powers.par_iter().map(|&p| storage_run(c, p).map(|r| (p, r))).collect::<Result<_>>()?;
    let scan = runs.iter().map(|(p, r)| (*p, r.retrieval_efficiency)).collect();
    let (power, best) = runs
        .into_iter()
        .max_by(|a, b| a.1.retrieval_efficiency.total_cmp(&b.1.retrieval_efficiency))
        .expect("scan has at least one point");
    Ok((power, best, scan))
}

fn chosen_storage(c: &Config) -> Result<(f64, PropagationResult, Vec<(f64, f64)>)> {
    if c.storage.optimize_control_power {
        optimize_storage_power(c)
    } else {
        let r = storage_run(c, c.storage.control_power_w)?;
        Ok((c.storage.control_power_w, r, Vec::new()))
    }
}

fn storage_table(c: &Config, run: &PropagationResult) -> Result<Table> {
    let setup = StorageSetup::from_config(c)?;
    let dark = control(c, 0.0, ControlEnvelope::Constant)?;
    let absorbed = propagate_pulse(&setup.probe, &dark, setup.od, &setup.scheme, &setup.grid)?;
    let mut table = Table::new(&[
        ("time", "s"),
        ("input_flux", "1/s"),
        ("output_flux_no_control", "1/s"),
        ("output_flux_memory", "1/s"),
        ("control_envelope", "1"),
    ]);
    for (i, &t) in run.times_s.iter().enumerate() {
        table.rows.push(vec![t, run.reference_flux[i], absorbed.output_flux[i], run.output_flux[i], setup.envelope.value(t)]);
    }
    Ok(table)
}

fn storage_summary(c: &Config, power: f64, run: &PropagationResult) -> Result<Summary> {
    let mut s = Summary::new();
    s.insert("control_power_w".into(), json!(power));
    s.insert("rabi_rad_per_s".into(), json!(control(c, power, ControlEnvelope::Constant)?.rabi_rad_per_s));
    s.insert("retrieval_efficiency".into(), json!(run.retrieval_efficiency));
    s.insert("leak_fraction".into(), json!(run.leak_fraction));
    s.insert("input_photons".into(), json!(run.input_photons));
    s.insert("output_photons".into(), json!(run.output_photons));
    Ok(s)
}

fn fig3b(c: &Config, seed: u64) -> Result<(Table, Summary)> {
    let (power, run, scan) = chosen_storage(c)?;
    let table = storage_table(c, &run)?;
    let mut s = storage_summary(c, power, &run)?;
    s.insert("target_efficiency".into(), json!(c.storage.target_efficiency));
    if !scan.is_empty() {
        s.insert("power_scan_w".into(), json!(scan.iter().map(|x| x.0).collect::<Vec<_>>()));
        s.insert("power_scan_efficiency".into(), json!(scan.iter().map(|x| x.1).collect::<Vec<_>>()));
    }
    let counting = CountingModel {
        mean_photons_in: c.probe.mean_photon_number,
        efficiency: run.retrieval_efficiency.clamp(0.0, 1.0),
        background_per_window: c.counting.background_per_window,
        n_shots: c.counting.n_shots,
        window_s: c.counting.window_s,
    };
    let counts = simulate_counting(&counting, seed)?;
    s.insert("analytic_snr".into(), json!(counting.analytic_snr()));
    s.insert("counting_snr".into(), json!(counts.snr));
    s.insert("counting_snr_standard_error".into(), json!(counts.snr_standard_error));
    s.insert("counting_seed".into(), json!(seed));
    Ok((table, s))
}

fn fig3c(c: &Config) -> Result<(Table, Summary)> {
    let (power, _, _) = chosen_storage(c)?;
    let setup = StorageSetup::from_config(c)?;
    let base = control(c, power, setup.envelope)?;
    let angles = linspace(0.0, std::f64::consts::PI, c.storage.polarization_points)?;
    // Only the projection of the control polarization on the fiber axis
    // drives the transition used for storage.
    let efficiencies: Vec<f64> = angles
        .par_iter()
        .map(|&theta| {
            let field = ControlField { rabi_rad_per_s: base.rabi_rad_per_s * theta.cos().abs(), ..base };
            propagate_pulse(&setup.probe, &field, setup.od, &setup.scheme, &setup.grid).map(|r| r.retrieval_efficiency)
        })
        .collect::<Result<_>>()?;
    let peak = efficiencies.iter().cloned().fold(0.0, f64::max);
    let mut table = Table::new(&[("polarization_angle", "rad"), ("retrieval_efficiency", "1"), ("relative_efficiency", "1")]);
    for (&a, &e) in angles.iter().zip(&efficiencies) {
        table.rows.push(vec![a, e, if peak > 0.0 { e / peak } else { 0.0 }]);
    }
    let mut s = Summary::new();
    s.insert("control_power_w".into(), json!(power));
    s.insert("max_efficiency".into(), json!(peak));
    Ok((table, s))
}

fn fig4a(c: &Config) -> Result<(Table, Summary)> {
    let p = decoherence_params(c);
    p.validate()?;
    let (tau_d, tau_t) = (p.tau_d(), p.tau_t());
    let mut table = Table::new(&[("storage_time", "s"), ("relative_efficiency", "1")]);
    for t in linspace(0.0, c.decoherence.t_max_s, c.decoherence.points)? {
        table.rows.push(vec![t, efficiency_decay(t, tau_d, tau_t)?]);
    }
    let mut s = Summary::new();
    s.insert("thermal_velocity_m_per_s".into(), json!(p.thermal_velocity()));
    s.insert("tau1_s".into(), json!(p.tau1()));
    s.insert("tau2_s".into(), json!(p.tau2()));
    s.insert("tau3_s".into(), json!(p.tau3()));
    s.insert("tau_d_s".into(), json!(tau_d));
    s.insert("tau_t_s".into(), json!(tau_t));
    Ok((table, s))
}

fn magnetic(c: &Config, b_field_t: f64) -> Result<MagneticScenario> {
    let w = &c.magnetic.m_weights;
    if w.len() != 9 {
        return Err(Error::invalid("m_weights", format!("expected 9 weights for m = -4..4, got {}", w.len())));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("m_weights", "weights must have a positive sum"));
    }
    let m_populations = (-4..=4).zip(w.iter().map(|x| x / total)).collect();
    let scenario = MagneticScenario { b_field_t, g_f: c.magnetic.g_f, m_populations };
    scenario.validate()?;
    Ok(scenario)
}

fn fig4bc(c: &Config, b_field_t: f64) -> Result<(Table, Summary)> {
    let scenario = magnetic(c, b_field_t)?;
    let params = decoherence_params(c);
    let times = linspace(0.0, c.magnetic.t_max_s, c.magnetic.points)?;
    let envelope = revival_envelope(&times, &scenario, &params)?;
    let mut table = Table::new(&[("storage_time", "s"), ("relative_efficiency", "1"), ("rephasing", "1"), ("decay_without_field", "1")]);
    for (&t, &e) in times.iter().zip(&envelope) {
        table.rows.push(vec![t, e, scenario.rephasing(t), efficiency_decay(t, params.tau_d(), params.tau_t())?]);
    }
    let mut s = Summary::new();
    s.insert("b_field_t".into(), json!(b_field_t));
    s.insert("half_larmor_period_s".into(), json!(half_larmor_period(b_field_t, c.magnetic.g_f)?));
    s.insert("revival_times_s".into(), json!(revival_times(&scenario, c.magnetic.t_max_s)));
    // The comb has small side lobes between revivals; keep only the maxima
    // where the Zeeman phases have substantially realigned.
    let peaks: Vec<f64> = local_maxima(&times, &envelope).into_iter().filter(|&t| scenario.rephasing(t) >= 0.5).collect();
    s.insert("envelope_peaks_s".into(), json!(peaks));
    Ok((table, s))
}

fn mode_scan(c: &Config) -> Result<(Table, Summary)> {
    let m = &c.mode_scan;
    let diameters = linspace(m.diameter_min_m, m.diameter_max_m, m.points)?;
    let scan = surface_intensity_scan(c.physics.wavelength_m, &diameters, m.power_w, c.physics.n_core, c.physics.n_clad)?;
    let mut table =
        Table::new(&[("diameter", "m"), ("n_eff", "1"), ("evanescent_fraction", "1"), ("surface_intensity", "W/m^2")]);
    table.rows =
        scan.points.iter().map(|p| vec![p.diameter_m, p.n_eff, p.evanescent_fraction, p.surface_intensity]).collect();
    let mode = solve_he11(&fiber(c))?;
    let mut s = Summary::new();
    s.insert("argmax_diameter_m".into(), json!(scan.argmax_diameter_m));
    s.insert("diameter_m".into(), json!(c.fiber.diameter_m));
    s.insert("evanescent_fraction".into(), json!(mode.evanescent_fraction));
    s.insert("n_eff".into(), json!(mode.n_eff));
    Ok((table, s))
}

fn custom(c: &Config) -> Result<(Table, Summary)> {
    let run = storage_run(c, c.storage.control_power_w)?;
    let table = storage_table(c, &run)?;
    let mut s = storage_summary(c, c.storage.control_power_w, &run)?;
    s.insert("transmission".into(), json!(run.transmission));
    Ok((table, s))
}

#[cfg(test)]
mod tests {
    use super::super::{run_scenario, Scenario};
    use super::*;

    fn summary_f64(s: &Summary, key: &str) -> f64 {
        s[key].as_f64().unwrap()
    }

    #[test]
    fn atom_numbers() {
        let (_, s) = fig1b(&Config::default()).unwrap();
        assert!((summary_f64(&s, "atom_number_annulus") - 1508.0).abs() < 1.0);
        assert!((summary_f64(&s, "atom_number_from_absorption") - 2105.263157894737).abs() < 1e-6);
    }

    #[test]
    fn optical_depth_self_fit() {
        let (_, s) = fig1c(&Config::default()).unwrap();
        assert!((summary_f64(&s, "fitted_od") - 3.0).abs() < 0.01);
    }

    #[test]
    fn spectra_have_one_column_per_power() {
        let c = Config::default();
        let (t, s) = fig2(&c).unwrap();
        assert_eq!(t.columns.len(), 2 + c.control.powers_w.len());
        let resonant = s["resonant_transmission"].as_array().unwrap();
        assert!((resonant[3].as_f64().unwrap() - 0.75).abs() < 1e-6);
    }

    #[test]
    fn revival_times_for_default_field() {
        let (_, s) = fig4bc(&Config::default(), 4e-5).unwrap();
        let times: Vec<f64> = s["revival_times_s"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(times.len(), 2);
        assert!((times[0] - 3.57e-6).abs() < 0.01e-6 && (times[1] - 7.14e-6).abs() < 0.02e-6);
    }

    #[test]
    fn mode_scan_peaks_near_400_nm() {
        let (_, s) = mode_scan(&Config::default()).unwrap();
        assert!((summary_f64(&s, "argmax_diameter_m") - 400e-9).abs() < 30e-9);
    }

    #[test]
    fn solver_errors_carry_scenario_context() {
        let s = Scenario::new(ScenarioId::Custom).with_override("grid.z_steps", "1");
        match run_scenario(&s, &Config::default()) {
            Err(e @ Error::Context { .. }) => {
                assert!(e.to_string().contains("custom"));
                assert!(matches!(e.root(), Error::GridResolution(_)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_weights_rejected() {
        let c = Config::default().with_overrides(&["magnetic.m_weights=[1.0, 2.0]".parse().unwrap()]).unwrap();
        assert!(magnetic(&c, 4e-5).is_err());
    }
}
