//! One-dimensional Maxwell–Bloch propagation of a weak probe through the
//! Λ medium, in the retarded frame `τ = t − z/c` with `ζ = z/L ∈ [0, 1]`:
//!
//! ```text
//! ∂_τ P = −(Γ/2) P + (i/2) E + (i/2) Ω(τ) S
//! ∂_τ S = −(γ + iΔ_c) S + (i/2) Ω(τ) P
//! ∂_ζ E = i (od·Γ/2) P
//! ```
//!
//! `E` is in √(photons/s) so `|E|²` is a photon flux. The probe is linear and
//! the control undepleted. Time stepping is Strang splitting: the local
//! atomic 2×2 block is advanced exactly with its matrix exponential, the
//! field-driven part with classical RK4 on the method-of-lines grid in ζ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ControlField, LambdaScheme, ProbePulse};
use crate::{Error, Result};

const MIN_POINTS_PER_FWHM: f64 = 20.0;
const MIN_Z_STEPS: usize = 50;
/// Largest admissible rate·dt for any term of the system.
const MAX_RATE_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationGrid {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub dt_s: f64,
    pub z_steps: usize,
}

impl PropagationGrid {
    pub fn steps(&self) -> usize {
        ((self.t_end_s - self.t_start_s) / self.dt_s).round() as usize
    }

    /// Same span with `dt` and `dz` halved.
    pub fn refined(&self) -> Self {
        Self { dt_s: 0.5 * self.dt_s, z_steps: 2 * self.z_steps, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationResult {
    pub times_s: Vec<f64>,
    /// Output photon flux at ζ = 1.
    pub output_flux: Vec<f64>,
    /// Input photon flux (equivalently the od = 0 output).
    pub reference_flux: Vec<f64>,
    /// S(ζ) when the control first reaches zero, or at the end of the run if it never does.
    pub spinwave: Vec<Complex64>,
    pub spinwave_time_s: f64,
    /// Output/input energy over the whole run.
    pub transmission: f64,
    /// Output minus input flux centroid.
    pub group_delay_s: f64,
    /// Output energy before the control is back on, over input energy.
    pub leak_fraction: f64,
    /// Output energy after switch-on begins, over input energy.
    pub retrieval_efficiency: f64,
    pub input_photons: f64,
    pub output_photons: f64,
    /// (end of switch-off, start of switch-on) if the control was switched.
    pub dark_interval_s: Option<(f64, f64)>,
}

impl PropagationResult {
    fn trapz(&self, values: &[f64], window: (f64, f64)) -> f64 {
        let (t1, t2) = window;
        let mut acc = 0.0;
        for i in 1..self.times_s.len() {
            let (a, b) = (self.times_s[i - 1], self.times_s[i]);
            if b <= t1 || a >= t2 {
                continue;
            }
            // Clip the panel to the window, interpolating linearly.
            let lo = a.max(t1);
            let hi = b.min(t2);
            let w = b - a;
            let at = |t: f64| values[i - 1] + (values[i] - values[i - 1]) * (t - a) / w;
            acc += 0.5 * (at(lo) + at(hi)) * (hi - lo);
        }
        acc
    }

    pub fn output_photons_in(&self, window: (f64, f64)) -> f64 {
        self.trapz(&self.output_flux, window)
    }

    pub fn reference_photons(&self) -> f64 {
        self.trapz(&self.reference_flux, (f64::NEG_INFINITY, f64::INFINITY))
    }
}

/// Retrieved photons in `window` over the reference (empty-medium) photons.
pub fn storage_efficiency(result: &PropagationResult, window: (f64, f64)) -> Result<f64> {
    let (t1, t2) = window;
    let span = (result.times_s[0], *result.times_s.last().unwrap());
    if !(t2 > t1) || t2 <= span.0 || t1 >= span.1 {
        return Err(Error::EmptyWindow);
    }
    let reference = result.reference_photons();
    if reference <= 0.0 {
        return Ok(0.0);
    }
    Ok(result.output_photons_in(window) / reference)
}

/// Exact propagator of the atomic block
/// `[[−Γ/2, iΩ/2], [iΩ/2, −(γ+iΔ)]]` over `h`.
fn atomic_propagator(gamma_ge: f64, gamma_gs: f64, rabi: f64, detuning: f64, h: f64) -> [[Complex64; 2]; 2] {
    let i = Complex64::i();
    let a = Complex64::new(-0.5 * gamma_ge, 0.0);
    let d = Complex64::new(-gamma_gs, -detuning);
    let b = 0.5 * i * rabi;
    let m = 0.5 * (a + d);
    let n11 = 0.5 * (a - d);
    // N = M − mI is traceless with N² = (n11² + b²) I.
    let disc = (n11 * n11 + b * b).sqrt();
    let x = disc * h;
    let (ch, sh_over) = if x.norm() < 1e-4 {
        let x2 = x * x;
        (1.0 + x2 / 2.0 + x2 * x2 / 24.0, h * (1.0 + x2 / 6.0 + x2 * x2 / 120.0))
    } else {
        (x.cosh(), x.sinh() / disc)
    };
    let e = (m * h).exp();
    [
        [e * (ch + sh_over * n11), e * sh_over * b],
        [e * sh_over * b, e * (ch - sh_over * n11)],
    ]
}

struct Medium {
    nz: usize,
    dz: f64,
    /// i·od·Γ/2
    coupling: Complex64,
}

impl Medium {
    /// Field at every node for input amplitude `e_in` and polarization `p`.
    fn field(&self, e_in: Complex64, p: &[Complex64], out: &mut [Complex64]) {
        out[0] = e_in;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=self.nz {
            acc += 0.5 * self.dz * (p[k - 1] + p[k]);
            out[k] = e_in + self.coupling * acc;
        }
    }
}

/// Integrate the storage sequence for one probe pulse.
pub fn propagate_pulse(
    probe: &ProbePulse,
    control: &ControlField,
    od: f64,
    scheme: &LambdaScheme,
    grid: &PropagationGrid,
) -> Result<PropagationResult> {
    probe.validate()?;
    scheme.validate()?;
    if !(od >= 0.0) {
        return Err(Error::invalid("od", "must be non-negative"));
    }
    if !(grid.dt_s > 0.0 && grid.t_end_s > grid.t_start_s) {
        return Err(Error::GridResolution("time span and step must be positive".into()));
    }
    if probe.fwhm_s / grid.dt_s < MIN_POINTS_PER_FWHM {
        return Err(Error::GridResolution(format!(
            "{:.1} time points per FWHM, need at least {MIN_POINTS_PER_FWHM}",
            probe.fwhm_s / grid.dt_s
        )));
    }
    if grid.z_steps < MIN_Z_STEPS {
        return Err(Error::GridResolution(format!("{} z-steps, need at least {MIN_Z_STEPS}", grid.z_steps)));
    }
    let fastest = [
        0.5 * scheme.gamma_ge_rad_per_s,
        0.5 * control.rabi_rad_per_s,
        0.25 * od * scheme.gamma_ge_rad_per_s,
        probe.detuning_rad_per_s.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if fastest * grid.dt_s > MAX_RATE_STEP {
        return Err(Error::GridResolution(format!(
            "step-size violation: rate·dt = {:.3} exceeds {MAX_RATE_STEP}",
            fastest * grid.dt_s
        )));
    }

    let nz = grid.z_steps;
    let medium = Medium {
        nz,
        dz: 1.0 / nz as f64,
        coupling: Complex64::new(0.0, 0.5 * od * scheme.gamma_ge_rad_per_s),
    };
    let steps = grid.steps();
    let dt = grid.dt_s;
    let zero = Complex64::new(0.0, 0.0);
    let half_i = Complex64::new(0.0, 0.5);

    let mut p = vec![zero; nz + 1];
    let mut s = vec![zero; nz + 1];
    let mut field = vec![zero; nz + 1];
    let mut k = [vec![zero; nz + 1], vec![zero; nz + 1], vec![zero; nz + 1], vec![zero; nz + 1]];
    let mut stage = vec![zero; nz + 1];

    let mut times = Vec::with_capacity(steps + 1);
    let mut output = Vec::with_capacity(steps + 1);
    let mut reference = Vec::with_capacity(steps + 1);
    let mut spinwave: Option<(Vec<Complex64>, f64)> = None;

    let record = |t: f64, p: &[Complex64], field: &mut [Complex64], times: &mut Vec<f64>, out: &mut Vec<f64>, reference: &mut Vec<f64>| {
        let e_in = probe.amplitude(t);
        medium.field(e_in, p, field);
        times.push(t);
        out.push(field[nz].norm_sqr());
        reference.push(e_in.norm_sqr());
    };
    record(grid.t_start_s, &p, &mut field, &mut times, &mut output, &mut reference);

    let apply_atomic = |t0: f64, h: f64, p: &mut [Complex64], s: &mut [Complex64]| {
        let tm = t0 + 0.5 * h;
        let gamma = scheme.ground_decoherence(control.envelope.value(tm));
        let u = atomic_propagator(scheme.gamma_ge_rad_per_s, gamma, control.rabi_at(tm), control.detuning_rad_per_s, h);
        for (pk, sk) in p.iter_mut().zip(s.iter_mut()) {
            let (a, b) = (*pk, *sk);
            *pk = u[0][0] * a + u[0][1] * b;
            *sk = u[1][0] * a + u[1][1] * b;
        }
    };

    for n in 0..steps {
        let t0 = grid.t_start_s + n as f64 * dt;
        apply_atomic(t0, 0.5 * dt, &mut p, &mut s);

        // RK4 on ∂τ P = (i/2) E[P, τ].
        let offsets = [0.0, 0.5, 0.5, 1.0];
        for j in 0..4 {
            let src: &[Complex64] = if j == 0 {
                &p
            } else {
                let w = offsets[j] * dt;
                for ((st, pk), kk) in stage.iter_mut().zip(&p).zip(&k[j - 1]) {
                    *st = pk + kk * w;
                }
                &stage
            };
            medium.field(probe.amplitude(t0 + offsets[j] * dt), src, &mut field);
            for (kk, e) in k[j].iter_mut().zip(&field) {
                *kk = half_i * e;
            }
        }
        for idx in 0..=nz {
            p[idx] += (k[0][idx] + 2.0 * k[1][idx] + 2.0 * k[2][idx] + k[3][idx]) * (dt / 6.0);
        }

        apply_atomic(t0 + 0.5 * dt, 0.5 * dt, &mut p, &mut s);
        let t1 = t0 + dt;
        record(t1, &p, &mut field, &mut times, &mut output, &mut reference);
        if spinwave.is_none() && control.envelope.value(t1) == 0.0 {
            spinwave = Some((s.clone(), t1));
        }
    }
    let (spinwave, spinwave_time_s) = spinwave.unwrap_or_else(|| (s.clone(), *times.last().unwrap()));

    let mut result = PropagationResult {
        times_s: times,
        output_flux: output,
        reference_flux: reference,
        spinwave,
        spinwave_time_s,
        transmission: 0.0,
        group_delay_s: 0.0,
        leak_fraction: 0.0,
        retrieval_efficiency: 0.0,
        input_photons: 0.0,
        output_photons: 0.0,
        dark_interval_s: control.envelope.dark_interval(),
    };
    let all = (f64::NEG_INFINITY, f64::INFINITY);
    let input = result.reference_photons();
    let total_out = result.output_photons_in(all);
    result.input_photons = input;
    result.output_photons = total_out;
    if input > 0.0 {
        result.transmission = total_out / input;
        let centroid = |v: &[f64]| {
            let num: Vec<f64> = result.times_s.iter().zip(v).map(|(t, f)| t * f).collect();
            result.trapz(&num, all) / result.trapz(v, all)
        };
        if total_out > 0.0 {
            result.group_delay_s = centroid(&result.output_flux) - centroid(&result.reference_flux);
        }
        match result.dark_interval_s {
            Some((_, on_start)) => {
                result.leak_fraction = result.output_photons_in((f64::NEG_INFINITY, on_start)) / input;
                result.retrieval_efficiency = result.output_photons_in((on_start, f64::INFINITY)) / input;
            }
            None => result.leak_fraction = result.transmission,
        }
    }
    Ok(result)
}

/// Runs on `grid` and on the refined grid; fails if the retrieval efficiency
/// (or the transmission, for a constant control) moves by more than
/// `tolerance` relative. Returns the refined result and the relative change.
pub fn propagate_with_refinement_check(
    probe: &ProbePulse,
    control: &ControlField,
    od: f64,
    scheme: &LambdaScheme,
    grid: &PropagationGrid,
    tolerance: f64,
) -> Result<(PropagationResult, f64)> {
    let coarse = propagate_pulse(probe, control, od, scheme, grid)?;
    let fine = propagate_pulse(probe, control, od, scheme, &grid.refined())?;
    let metric = |r: &PropagationResult| {
        if r.dark_interval_s.is_some() {
            r.retrieval_efficiency
        } else {
            r.transmission
        }
    };
    let (a, b) = (metric(&coarse), metric(&fine));
    let change = if b != 0.0 { (a - b).abs() / b.abs() } else { (a - b).abs() };
    if change > tolerance {
        return Err(Error::Solver(format!(
            "not converged under grid refinement: relative change {change:.3e} > {tolerance:.1e}"
        )));
    }
    Ok((fine, change))
}
