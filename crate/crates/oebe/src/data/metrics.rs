//! Streaming metric accumulators: normalized MSE against the full-stream
//! target variance, average predictive log-likelihood, online classification
//! error, and the closed-form regret bound for static ensembles.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population (1/N) variance. The normalizing variance of the nMSE uses the
/// full stream, which is fixed before the online pass starts.
pub fn population_variance(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for v in values {
        n += 1;
        sum += v;
        sum_sq += v * v;
    }
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    (sum_sq / n as f64 - mean * mean).max(0.0)
}

/// Running nMSE and PLL accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTrace {
    sq_err_sum: f64,
    log_lik_sum: f64,
    count: usize,
    target_var: f64,
}

impl MetricTrace {
    /// `target_var` is the precomputed variance of the whole target stream.
    pub fn new(target_var: f64) -> Result<Self> {
        if !(target_var > 0.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(Self {
            sq_err_sum: 0.0,
            log_lik_sum: 0.0,
            count: 0,
            target_var,
        })
    }

    pub fn update(&mut self, predicted_mean: f64, log_density: f64, y: f64) {
        let d = predicted_mean - y;
        self.sq_err_sum += d * d;
        self.log_lik_sum += log_density;
        self.count += 1;
    }

    /// Cumulative squared error over `t * Var(y_1..T)`.
    pub fn nmse(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sq_err_sum / (self.count as f64 * self.target_var)
    }

    /// Average one-step-ahead predictive log-likelihood.
    pub fn pll(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.log_lik_sum / self.count as f64
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn target_var(&self) -> f64 {
        self.target_var
    }
}

/// Cumulative online classification error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTrace {
    errors: usize,
    count: usize,
}

impl ClassificationTrace {
    pub fn update(&mut self, prob_positive: f64, label: f64) {
        let predicted = if prob_positive >= 0.5 { 1.0 } else { -1.0 };
        if predicted != label {
            self.errors += 1;
        }
        self.count += 1;
    }

    pub fn error_rate(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.errors as f64 / self.count as f64
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Upper bound on the cumulative log-loss gap between a static ensemble and
/// any one expert held at fixed weights `theta_star`, for losses with second
/// derivative bounded by `c` and unit-norm features:
/// `|theta*|^2 / (2 s_theta^2) + (F/2) ln(1 + T c s_theta^2 / F) + ln M`.
pub fn compute_regret_bound(
    feature_dim: usize,
    prior_var: f64,
    horizon: usize,
    curvature: f64,
    n_models: usize,
    theta_star: &DVector<f64>,
) -> f64 {
    let f = feature_dim as f64;
    theta_star.norm_squared() / (2.0 * prior_var)
        + 0.5 * f * (1.0 + horizon as f64 * curvature * prior_var / f).ln()
        + (n_models as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions_have_zero_nmse() {
        let mut trace = MetricTrace::new(1.0).unwrap();
        for y in [0.3, -0.7, 1.2] {
            trace.update(y, -0.5, y);
        }
        assert_eq!(trace.nmse(), 0.0);
    }

    #[test]
    fn mean_predictor_approaches_unit_nmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ys: Vec<f64> = (0..20_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = population_variance(ys.iter().copied());
        let mut trace = MetricTrace::new(var).unwrap();
        for &y in &ys {
            trace.update(mean, 0.0, y);
        }
        assert_relative_eq!(trace.nmse(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn standard_normal_log_density_at_zero() {
        let mut trace = MetricTrace::new(1.0).unwrap();
        let log_density = -0.5 * (2.0 * std::f64::consts::PI).ln();
        trace.update(0.0, log_density, 0.0);
        assert_relative_eq!(trace.pll(), log_density);
    }

    #[test]
    fn zero_variance_is_rejected() {
        assert!(matches!(MetricTrace::new(0.0), Err(Error::ZeroVariance)));
    }

    #[test]
    fn accumulators_match_a_from_scratch_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut trace = MetricTrace::new(0.7).unwrap();
        let mut stored = Vec::new();
        for _ in 0..500 {
            let (mu, ll, y) = (
                rng.random_range(-1.0..1.0),
                rng.random_range(-3.0..0.0),
                rng.random_range(-1.0..1.0),
            );
            trace.update(mu, ll, y);
            stored.push((mu, ll, y));
        }
        let sq: f64 = stored.iter().map(|(mu, _, y)| (mu - y) * (mu - y)).sum();
        let ll: f64 = stored.iter().map(|(_, l, _)| l).sum();
        assert_relative_eq!(trace.nmse(), sq / (500.0 * 0.7), epsilon = 1e-12);
        assert_relative_eq!(trace.pll(), ll / 500.0, epsilon = 1e-12);
    }

    #[test]
    fn regret_bound_limits() {
        let theta = DVector::from_vec(vec![3.0, 4.0]);
        // T = 0 with a single model leaves only the prior term.
        let base = compute_regret_bound(2, 2.0, 0, 1.0, 1, &theta);
        assert_relative_eq!(base, 25.0 / 4.0);
        // Doubling the number of models adds exactly ln 2.
        let m2 = compute_regret_bound(2, 2.0, 1000, 4.0, 2, &theta);
        let m4 = compute_regret_bound(2, 2.0, 1000, 4.0, 4, &theta);
        assert_relative_eq!(m4 - m2, 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn classification_trace_counts_sign_mismatches() {
        let mut trace = ClassificationTrace::default();
        trace.update(0.9, 1.0);
        trace.update(0.2, 1.0);
        trace.update(0.4, -1.0);
        assert_relative_eq!(trace.error_rate(), 1.0 / 3.0);
    }
}
