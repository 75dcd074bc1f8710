use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Photon-counting bookkeeping for the retrieved pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingModel {
    pub mean_photons_in: f64,
    pub efficiency: f64,
    /// Mean dark/background counts in the read-out window.
    pub background_per_window: f64,
    pub n_shots: u64,
    pub window_s: f64,
}

impl CountingModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mean_photons_in", self.mean_photons_in),
            ("background_per_window", self.background_per_window),
            ("window_s", self.window_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid("efficiency", "must lie in [0, 1]"));
        }
        if self.n_shots == 0 {
            return Err(Error::invalid("n_shots", "at least one shot is required"));
        }
        Ok(())
    }

    pub fn mean_signal(&self) -> f64 {
        self.mean_photons_in * self.efficiency
    }

    /// `mean signal / mean background`; infinite without background.
    pub fn analytic_snr(&self) -> f64 {
        snr(self.mean_signal(), self.background_per_window)
    }
}

fn snr(signal: f64, background: f64) -> f64 {
    if background > 0.0 {
        signal / background
    } else if signal > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingResult {
    pub signal_counts: Vec<u64>,
    pub background_counts: Vec<u64>,
    pub mean_signal: f64,
    pub mean_background: f64,
    pub snr: f64,
    /// One standard error of the SNR estimate (delta method); zero or
    /// infinite when the ratio is degenerate.
    pub snr_standard_error: f64,
}

fn draws(mean: f64, n: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    if mean == 0.0 {
        return Ok(vec![0; n as usize]);
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::invalid("mean", e.to_string()))?;
    Ok((0..n).map(|_| poisson.sample(rng) as u64).collect())
}

/// Independent Poisson draws per shot for signal and background, from a
/// ChaCha8 stream seeded with `seed`.
pub fn simulate_counting(model: &CountingModel, seed: u64) -> Result<CountingResult> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n_shots;
    let signal = draws(model.mean_signal(), n, &mut rng)?;
    let background = draws(model.background_per_window, n, &mut rng)?;
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / n as f64;
    let (s, b) = (mean(&signal), mean(&background));
    let ratio = snr(s, b);
    let error = if b > 0.0 && s > 0.0 {
        // Poisson variances estimated by the sample means.
        ratio * ((1.0 / s + 1.0 / b) / n as f64).sqrt()
    } else if b > 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CountingResult { signal_counts: signal, background_counts: background, mean_signal: s, mean_background: b, snr: ratio, snr_standard_error: error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CountingModel {
        CountingModel { mean_photons_in: 0.6, efficiency: 0.10, background_per_window: 0.003, n_shots: 200_000, window_s: 100e-9 }
    }

    #[test]
    fn converges_to_analytic_ratio() {
        let m = model();
        assert!((m.analytic_snr() - 20.0).abs() < 1e-12);
        let r = simulate_counting(&m, 1).unwrap();
        assert!((r.snr - 20.0).abs() < 3.0 * r.snr_standard_error, "{} ± {}", r.snr, r.snr_standard_error);
        assert_eq!(r.signal_counts.len(), 200_000);
    }

    #[test]
    fn degenerate_ratios() {
        let mut m = model();
        m.background_per_window = 0.0;
        assert_eq!(m.analytic_snr(), f64::INFINITY);
        assert_eq!(simulate_counting(&m, 0).unwrap().snr, f64::INFINITY);
        let mut m = model();
        m.efficiency = 0.0;
        assert_eq!(m.analytic_snr(), 0.0);
        assert_eq!(simulate_counting(&m, 0).unwrap().snr, 0.0);
    }

    #[test]
    fn reproducible_per_seed() {
        let mut m = model();
        m.n_shots = 1000;
        assert_eq!(simulate_counting(&m, 42).unwrap(), simulate_counting(&m, 42).unwrap());
        assert_ne!(simulate_counting(&m, 42).unwrap().signal_counts, simulate_counting(&m, 43).unwrap().signal_counts);
    }

    #[test]
    fn validation() {
        let mut m = model();
        m.n_shots = 0;
        assert!(simulate_counting(&m, 0).is_err());
        let mut m = model();
        m.efficiency = 1.5;
        assert!(simulate_counting(&m, 0).is_err());
    }
}
