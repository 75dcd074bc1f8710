//! Damped least-squares curve fitting for the registered absorption,
//! lifetime and EIT models.

mod models;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use models::{evaluate_model, ModelId, ParamSpec};

use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const TOLERANCE: f64 = 1e-10;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Per-point standard deviations; unit weights when absent.
    pub sigma: Option<Vec<f64>>,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y, sigma: None }
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.y.len() != self.x.len() {
            return Err(Error::Data(format!("{} x values but {} y values", self.x.len(), self.y.len())));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() {
                return Err(Error::Data(format!("{} sigma values for {} points", s.len(), self.x.len())));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Data("sigma values must be positive and finite".into()));
            }
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::Data("data contain non-finite values".into()));
        }
        Ok(())
    }

    fn sigma_at(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| s[i])
    }
}

/// Read `x, y[, sigma]` columns. Lines starting with `#` are skipped, as is a
/// leading header row.
pub fn read_fit_data(path: &Path) -> Result<FitData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (mut x, mut y, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    let mut with_sigma = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(_) => return Err(Error::Data(format!("{}: row {}: non-numeric field", path.display(), row + 1))),
        };
        let cols = values.len();
        if !(2..=3).contains(&cols) {
            return Err(Error::Data(format!("{}: row {}: expected 2 or 3 columns, got {cols}", path.display(), row + 1)));
        }
        if *with_sigma.get_or_insert(cols == 3) != (cols == 3) {
            return Err(Error::Data(format!("{}: row {}: inconsistent column count", path.display(), row + 1)));
        }
        x.push(values[0]);
        y.push(values[1]);
        if cols == 3 {
            sigma.push(values[2]);
        }
    }
    let data = FitData { x, y, sigma: if with_sigma == Some(true) { Some(sigma) } else { None } };
    data.validate()?;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub model_id: ModelId,
    pub data: FitData,
    pub initial_guess: Vec<f64>,
    /// Per-parameter `(lo, hi)`; open-ended positive range when absent.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub frozen: Vec<String>,
}

impl FitProblem {
    /// Problem with the model's default frozen set and no explicit bounds.
    pub fn new(model_id: ModelId, data: FitData, initial_guess: Vec<f64>) -> Self {
        let frozen = model_id.default_frozen().iter().map(|s| s.to_string()).collect();
        Self { model_id, data, initial_guess, bounds: None, frozen }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| {
            self.model_id.parameters().iter().map(|p| if p.positive { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, f64::INFINITY) }).collect()
        })
    }

    fn free_indices(&self) -> Result<Vec<usize>> {
        for name in &self.frozen {
            if self.model_id.index_of(name).is_none() {
                return Err(Error::FitProblem(format!("{} has no parameter `{name}`", self.model_id)));
            }
        }
        Ok((0..self.model_id.parameters().len())
            .filter(|&i| !self.frozen.iter().any(|f| f == self.model_id.parameters()[i].name))
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        let specs = self.model_id.parameters();
        if self.initial_guess.len() != specs.len() {
            return Err(Error::FitProblem(format!(
                "{} takes {} parameters, guess has {}",
                self.model_id,
                specs.len(),
                self.initial_guess.len()
            )));
        }
        let free = self.free_indices()?;
        if free.is_empty() {
            return Err(Error::FitProblem("every parameter is frozen".into()));
        }
        let needed = 3.max(free.len() + 1);
        if self.data.len() < needed {
            return Err(Error::FitProblem(format!("{} data points, need at least {needed}", self.data.len())));
        }
        let bounds = self.bounds();
        if bounds.len() != specs.len() {
            return Err(Error::FitProblem("one (lo, hi) bound per parameter is required".into()));
        }
        for ((spec, &(lo, hi)), &g) in specs.iter().zip(&bounds).zip(&self.initial_guess) {
            if !(lo < hi) {
                return Err(Error::FitProblem(format!("empty bounds for {}", spec.name)));
            }
            if !(g >= lo && g <= hi && g.is_finite()) {
                return Err(Error::FitProblem(format!("guess {g:e} for {} lies outside [{lo:e}, {hi:e}]", spec.name)));
            }
            if spec.positive && !(g > 0.0) {
                return Err(Error::FitProblem(format!("{} must start positive", spec.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_id: ModelId,
    pub names: Vec<String>,
    pub units: Vec<String>,
    /// All parameters in model order, frozen ones at their guessed value.
    pub parameters: Vec<f64>,
    /// 1σ from the covariance diagonal; zero for frozen parameters.
    pub uncertainties: Vec<f64>,
    /// Row-major, in natural units, scaled by the reduced χ².
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub degrees_of_freedom: usize,
    /// `y − model`, in input order.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub n_iterations: usize,
    /// χ² after each accepted step, starting with the initial guess.
    pub chi2_history: Vec<f64>,
    /// False when no σ column was supplied: χ² is then a plain sum of squares.
    pub weighted: bool,
    /// Parameters along near-null directions of the curvature matrix.
    pub unidentifiable: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.parameters[i], self.uncertainties[i]))
    }
}

/// Maps the free parameters to an unconstrained internal vector.
struct Transform<'a> {
    specs: &'a [ParamSpec],
    free: &'a [usize],
    bounds: &'a [(f64, f64)],
    base: Vec<f64>,
}

impl Transform<'_> {
    fn to_internal(&self, params: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.free.len(),
            self.free.iter().map(|&i| if self.specs[i].positive { params[i].ln() } else { params[i] }),
        )
    }

    fn to_natural(&self, q: &DVector<f64>) -> Vec<f64> {
        let mut p = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            let v = if self.specs[i].positive { q[k].exp() } else { q[k] };
            let (lo, hi) = self.bounds[i];
            p[i] = v.clamp(lo, hi);
        }
        p
    }

    /// `dp/dq` for each free parameter.
    fn scale(&self, q: &DVector<f64>) -> Vec<f64> {
        self.free.iter().enumerate().map(|(k, &i)| if self.specs[i].positive { q[k].exp() } else { 1.0 }).collect()
    }
}

/// Least-squares fit of `problem.model_id` to `problem.data`.
///
/// Data are sorted by abscissa before fitting so the result does not depend
/// on input order. Returns an error for malformed problems or a model that
/// cannot be evaluated at the guess; running out of iterations is reported
/// through `converged = false`.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    fit_with_limit(problem, MAX_ITERATIONS)
}

/// [`fit`] with a caller-chosen iteration cap.
pub fn fit_with_limit(problem: &FitProblem, max_iterations: usize) -> Result<FitResult> {
    problem.validate()?;
    let model = problem.model_id;
    let specs = model.parameters();
    let free = problem.free_indices()?;
    let bounds = problem.bounds();
    let data = &problem.data;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        (data.x[a], data.y[a], data.sigma_at(a))
            .partial_cmp(&(data.x[b], data.y[b], data.sigma_at(b)))
            .expect("finite data")
    });
    let x: Vec<f64> = order.iter().map(|&i| data.x[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| data.y[i]).collect();
    let w: Vec<f64> = order.iter().map(|&i| 1.0 / data.sigma_at(i)).collect();
    let m = x.len();
    let n = free.len();

    let tf = Transform { specs, free: &free, bounds: &bounds, base: problem.initial_guess.clone() };
    let residual = |q: &DVector<f64>| -> Result<DVector<f64>> {
        let f = evaluate_model(model, &tf.to_natural(q), &x)?;
        Ok(DVector::from_iterator(m, f.iter().zip(&y).zip(&w).map(|((f, y), w)| (f - y) * w)))
    };
    let jacobian = |q: &DVector<f64>, r0: &DVector<f64>| -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(m, n);
        for k in 0..n {
            let h = (1e-6 * q[k].abs()).max(1e-8);
            let mut qh = q.clone();
            qh[k] += h;
            let rh = residual(&qh)?;
            j.set_column(k, &((rh - r0) / h));
        }
        Ok(j)
    };

    let mut q = tf.to_internal(&problem.initial_guess);
    let mut r = residual(&q)?;
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::FitProblem("model is not finite at the initial guess".into()));
    }
    let mut history = vec![cost];
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;
    let mut j = jacobian(&q, &r)?;
    // Damping scale is the running maximum of diag(JᵀJ), as in MINPACK, so a
    // direction that flattens out does not lose its damping and run away.
    let mut damping = vec![0.0f64; n];

    while iterations < max_iterations && !converged {
        iterations += 1;
        let a = j.transpose() * &j;
        let g = j.transpose() * &r;
        for (k, d) in damping.iter_mut().enumerate() {
            *d = d.max(a[(k, k)]);
        }
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * damping[k].max(1e-300);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = -chol.solve(&g);
            let q_new = tf.to_internal(&tf.to_natural(&(&q + &step)));
            // Overflowing trial points count as rejected steps.
            let Ok(r_new) = residual(&q_new) else {
                lambda *= 10.0;
                continue;
            };
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new <= cost {
                let rel_cost = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                let rel_step = (&q_new - &q).norm() / (q.norm() + TOLERANCE);
                q = q_new;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                converged = rel_cost < TOLERANCE || rel_step < TOLERANCE || cost == 0.0;
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: a minimum to working precision.
            converged = true;
            break;
        }
        j = jacobian(&q, &r)?;
    }

    let params = tf.to_natural(&q);
    let dof = m - n;
    let reduced = cost / dof as f64;

    let a = j.transpose() * &j;
    let eig = a.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut flagged = vec![false; n];
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if !(ev > 1e-12 * max_eig) {
            for (i, f) in flagged.iter_mut().enumerate() {
                if eig.eigenvectors[(i, k)].abs() > 0.1 {
                    *f = true;
                }
            }
        }
    }
    let inverse = if flagged.iter().any(|&f| f) { None } else { a.cholesky().map(|c| c.inverse()) };

    let total = specs.len();
    let mut covariance = vec![vec![0.0; total]; total];
    let scale = tf.scale(&q);
    for (ka, &ia) in free.iter().enumerate() {
        for (kb, &ib) in free.iter().enumerate() {
            covariance[ia][ib] = match &inverse {
                Some(inv) => inv[(ka, kb)] * scale[ka] * scale[kb] * reduced,
                None => f64::NAN,
            };
        }
    }
    let uncertainties = (0..total).map(|i| if free.contains(&i) { covariance[i][i].sqrt() } else { 0.0 }).collect();

    let fitted = evaluate_model(model, &params, &data.x)?;
    Ok(FitResult {
        model_id: model,
        names: specs.iter().map(|s| s.name.to_string()).collect(),
        units: specs.iter().map(|s| s.unit.to_string()).collect(),
        parameters: params,
        uncertainties,
        covariance,
        chi2: cost,
        reduced_chi2: reduced,
        degrees_of_freedom: dof,
        residuals: data.y.iter().zip(&fitted).map(|(y, f)| y - f).collect(),
        converged,
        n_iterations: iterations,
        chi2_history: history,
        weighted: data.sigma.is_some(),
        unidentifiable: free.iter().zip(&flagged).filter(|(_, &f)| f).map(|(&i, _)| specs[i].name.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(model: ModelId, truth: &[f64], noise: f64, seed: u64) -> FitData {
        let x = model.default_grid(100);
        let mut y = evaluate_model(model, truth, &x).unwrap();
        if noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, noise).unwrap();
            y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            FitData::new(x, y).with_sigma(vec![noise; 100])
        } else {
            FitData::new(x, y)
        }
    }

    fn guess(truth: &[f64]) -> Vec<f64> {
        truth.iter().enumerate().map(|(i, t)| t * if i % 2 == 0 { 1.2 } else { 0.85 }).collect()
    }

    #[test]
    fn zero_noise_recovers_truth() {
        for model in ModelId::ALL {
            let truth = model.reference_parameters();
            let mut problem = FitProblem::new(model, synthetic(model, &truth, 0.0, 0), guess(&truth));
            for f in &problem.frozen {
                let i = model.index_of(f).unwrap();
                problem.initial_guess[i] = truth[i];
            }
            let r = fit(&problem).unwrap();
            assert!(r.converged, "{model}");
            for (p, t) in r.parameters.iter().zip(&truth) {
                assert!((p - t).abs() <= 1e-6 * t.abs(), "{model}: {p} vs {t}");
            }
            assert!(r.reduced_chi2 < 1e-12, "{model}: {}", r.reduced_chi2);
            assert!(!r.weighted);
        }
    }

    #[test]
    fn noisy_round_trip_within_three_sigma() {
        let model = ModelId::LorentzianOd;
        let truth = model.reference_parameters();
        let r = fit(&FitProblem::new(model, synthetic(model, &truth, 0.01, 7), guess(&truth))).unwrap();
        assert!(r.converged);
        for (i, t) in truth.iter().enumerate() {
            assert!((r.parameters[i] - t).abs() <= 3.0 * r.uncertainties[i], "{}", r.names[i]);
        }
        assert!((r.reduced_chi2 - 1.0).abs() < 0.5);
    }

    #[test]
    fn chi2_never_increases() {
        let model = ModelId::EitSpectrum;
        let truth = model.reference_parameters();
        let r = fit(&FitProblem::new(model, synthetic(model, &truth, 0.01, 3), guess(&truth))).unwrap();
        assert!(r.chi2_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*r.chi2_history.last().unwrap(), r.chi2);
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let model = ModelId::EitSpectrum;
        let truth = model.reference_parameters();
        let r = fit(&FitProblem::new(model, synthetic(model, &truth, 0.01, 11), guess(&truth))).unwrap();
        let n = r.parameters.len();
        let c = DMatrix::from_fn(n, n, |i, j| r.covariance[i][j]);
        assert!((&c - c.transpose()).abs().max() <= 1e-12 * c.abs().max());
        let scale = c.abs().max();
        assert!(c.symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-12 * scale));
    }

    #[test]
    fn reorder_invariance() {
        let model = ModelId::DecayLifetime;
        let truth = model.reference_parameters();
        let data = synthetic(model, &truth, 0.01, 5);
        let a = fit(&FitProblem::new(model, data.clone(), guess(&truth))).unwrap();
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.reverse();
        idx.swap(3, 50);
        let shuffled = FitData {
            x: idx.iter().map(|&i| data.x[i]).collect(),
            y: idx.iter().map(|&i| data.y[i]).collect(),
            sigma: data.sigma.as_ref().map(|s| idx.iter().map(|&i| s[i]).collect()),
        };
        let b = fit(&FitProblem::new(model, shuffled, guess(&truth))).unwrap();
        for (p, q) in a.parameters.iter().zip(&b.parameters) {
            assert!((p - q).abs() <= 1e-9 * p.abs());
        }
    }

    #[test]
    fn sigma_scaling_leaves_parameters() {
        let model = ModelId::Saturation;
        let truth = model.reference_parameters();
        let data = synthetic(model, &truth, 0.01, 9);
        let a = fit(&FitProblem::new(model, data.clone(), guess(&truth))).unwrap();
        for c in [3.0, 0.1] {
            let scaled = FitData { sigma: data.sigma.as_ref().map(|s| s.iter().map(|v| v * c).collect()), ..data.clone() };
            let b = fit(&FitProblem::new(model, scaled, guess(&truth))).unwrap();
            for (p, q) in a.parameters.iter().zip(&b.parameters) {
                assert!((p - q).abs() <= 1e-9 * p.abs(), "{p} vs {q}");
            }
            assert!((b.reduced_chi2 * c * c - a.reduced_chi2).abs() < 1e-9 * a.reduced_chi2);
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let model = ModelId::EitSpectrum;
        let truth = model.reference_parameters();
        let mut g = truth.clone();
        g[3] *= 3.0;
        let problem = FitProblem::new(model, synthetic(model, &truth, 0.01, 1), g);
        let r = fit_with_limit(&problem, 2).unwrap();
        assert!(!r.converged);
        assert_eq!(r.n_iterations, 2);
        assert!(fit(&problem).unwrap().converged);
    }

    #[test]
    fn unidentifiable_parameter_is_reported() {
        // With Ω = 0 the EIT model does not depend on γ_gs.
        let model = ModelId::EitSpectrum;
        let mut truth = model.reference_parameters();
        truth[3] = 1e-3;
        let data = synthetic(model, &truth, 0.0, 0);
        let mut problem = FitProblem::new(model, data, truth.clone());
        problem.frozen = vec!["od".into(), "gamma_rad_per_s".into()];
        let r = fit(&problem).unwrap();
        assert!(!r.unidentifiable.is_empty());
        assert!(r.uncertainties[2].is_nan());
    }

    #[test]
    fn problem_validation() {
        let model = ModelId::LorentzianOd;
        let truth = model.reference_parameters();
        let data = synthetic(model, &truth, 0.0, 0);
        let few = FitData::new(data.x[..2].to_vec(), data.y[..2].to_vec());
        assert!(matches!(fit(&FitProblem::new(model, few, truth.clone())), Err(Error::FitProblem(_))));
        let mut p = FitProblem::new(model, data.clone(), truth.clone());
        p.bounds = Some(vec![(0.0, 1.0), (0.0, 1e9)]);
        assert!(fit(&p).is_err());
        let mut p = FitProblem::new(model, data.clone(), truth.clone());
        p.frozen = vec!["tau".into()];
        assert!(fit(&p).is_err());
        let mut p = FitProblem::new(model, data, truth);
        p.frozen = vec!["od".into(), "gamma_rad_per_s".into()];
        assert!(fit(&p).is_err());
    }

    #[test]
    fn frozen_transit_time() {
        let model = ModelId::DecayLifetime;
        let truth = model.reference_parameters();
        let mut problem = FitProblem::new(model, synthetic(model, &truth, 0.01, 2), vec![4e-6, truth[1]]);
        problem.frozen = vec!["tau_t_s".into()];
        let r = fit(&problem).unwrap();
        assert_eq!(r.parameters[1], truth[1]);
        assert_eq!(r.uncertainties[1], 0.0);
        assert!((r.parameters[0] - truth[0]).abs() <= 3.0 * r.uncertainties[0]);
        assert_eq!(r.degrees_of_freedom, 99);
    }

    #[test]
    fn reads_csv_with_comments_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "# digest abc\nx,y,sigma\n1, 2, 0.1\n2,3,0.1\n\n3,4,0.2\n").unwrap();
        let d = read_fit_data(&path).unwrap();
        assert_eq!(d.x, vec![1.0, 2.0, 3.0]);
        assert_eq!(d.sigma, Some(vec![0.1, 0.1, 0.2]));
        std::fs::write(&path, "x,y\n1,2\n2,3,4\n").unwrap();
        assert!(matches!(read_fit_data(&path), Err(Error::Data(_))));
        std::fs::write(&path, "1,2\nfoo,3\n").unwrap();
        assert!(matches!(read_fit_data(&path), Err(Error::Data(_))));
        assert!(read_fit_data(&dir.path().join("missing.csv")).is_err());
    }
}
