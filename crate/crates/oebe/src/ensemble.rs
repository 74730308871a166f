//! Bayesian model averaging over basis-expansion experts: mixture
//! prediction, multiplicative weight updates in the log domain, optional
//! Markov switching of the weights, and the block construction that couples
//! dynamic and static copies of the same experts.
//!
//! One online step runs in a fixed phase order: switch the weights, drift
//! every expert, predict and form the mixture, reweight by the per-expert
//! predictive likelihoods, then correct every expert. Experts whose weight
//! has collapsed to zero are skipped in the mixture but still drifted and
//! corrected, so a later switch can revive them with a current posterior.

// The step phases walk several parallel per-expert arrays by index.
#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bayes_linear::{ExpertModel, Likelihood, PredictiveGaussian};
use crate::error::{Error, Result};

/// Default threshold below which a weight is set to exactly zero.
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-16;

const SIMPLEX_TOL: f64 = 1e-12;

/// The full averaging state: experts, simplex weights, and the optional
/// column-stochastic switching matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleState {
    pub experts: Vec<ExpertModel>,
    pub weights: DVector<f64>,
    pub switching: Option<DMatrix<f64>>,
    pub weight_floor: f64,
    /// Experts permanently removed after a numerical failure.
    pub disabled: Vec<bool>,
}

/// Moment-matched mixture prediction. For logistic ensembles `mean` is the
/// mixture probability of the +1 label and `var` its Bernoulli variance; the
/// per-expert entries carry the same convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixturePrediction {
    pub mean: f64,
    pub var: f64,
    pub per_expert: Vec<PredictiveGaussian>,
}

/// Result of one online step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub prediction: MixturePrediction,
    /// Log predictive density (or log probability) of the observed target
    /// under each expert, evaluated before correction.
    pub per_expert_log_lik: Vec<f64>,
    /// Log of the full mixture density at the observation, from the
    /// post-switch weights in log-sum-exp form. This is the PLL increment.
    pub log_mixture_density: f64,
    /// Experts zeroed this step because of a numerical failure.
    pub dropped: Vec<usize>,
    /// Experts whose weight left zero through the switching matrix.
    pub revived: Vec<usize>,
}

impl EnsembleState {
    /// Uniform-weight ensemble without switching.
    pub fn new(experts: Vec<ExpertModel>, weight_floor: f64) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::InvalidParameter {
                name: "experts",
                reason: "ensemble needs at least one expert".into(),
            });
        }
        let dim = experts[0].basis.input_dim();
        if experts.iter().any(|e| e.basis.input_dim() != dim) {
            return Err(Error::InvalidParameter {
                name: "experts",
                reason: "all experts must share the input dimension".into(),
            });
        }
        let m = experts.len();
        let disabled = vec![false; m];
        Ok(Self {
            experts,
            weights: DVector::from_element(m, 1.0 / m as f64),
            switching: None,
            weight_floor,
            disabled,
        })
    }

    /// Installs a switching matrix. Columns must each sum to one so the
    /// weight vector stays on the simplex.
    pub fn with_switching(mut self, q: DMatrix<f64>) -> Result<Self> {
        let m = self.experts.len();
        if q.nrows() != m || q.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: q.nrows(),
            });
        }
        for j in 0..m {
            let col_sum: f64 = q.column(j).iter().sum();
            if (col_sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidParameter {
                    name: "switching",
                    reason: format!("column {j} sums to {col_sum}, not 1"),
                });
            }
            if q.column(j).iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter {
                    name: "switching",
                    reason: format!("column {j} has entries outside [0, 1]"),
                });
            }
        }
        self.switching = Some(q);
        Ok(self)
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    /// Moment-matched mixture prediction with the current weights. Experts
    /// with zero weight (or disabled ones) are skipped.
    pub fn ensemble_predict(&self, x: &[f64]) -> Result<MixturePrediction> {
        let per_expert = self.per_expert_predictions(x)?;
        Ok(self.mix(&per_expert))
    }

    fn per_expert_predictions(&self, x: &[f64]) -> Result<Vec<PredictiveGaussian>> {
        self.experts
            .iter()
            .map(|e| {
                let phi = e.basis.featurize(x)?;
                match e.likelihood {
                    Likelihood::Gaussian => e.predict(&phi),
                    Likelihood::Logistic => {
                        let p = e.class_prob_positive(&phi);
                        Ok(PredictiveGaussian {
                            mean: p,
                            var: p * (1.0 - p),
                        })
                    }
                }
            })
            .collect()
    }

    fn mix(&self, per_expert: &[PredictiveGaussian]) -> MixturePrediction {
        let mut mean = 0.0;
        for (m, pred) in per_expert.iter().enumerate() {
            if self.weights[m] > 0.0 && !self.disabled[m] {
                mean += self.weights[m] * pred.mean;
            }
        }
        let mut var = 0.0;
        for (m, pred) in per_expert.iter().enumerate() {
            if self.weights[m] > 0.0 && !self.disabled[m] {
                let d = mean - pred.mean;
                var += self.weights[m] * (pred.var + d * d);
            }
        }
        MixturePrediction {
            mean,
            var,
            per_expert: per_expert.to_vec(),
        }
    }

    /// One full online step on the observation `(x, y)`. `step_index` is used
    /// only for diagnostics.
    pub fn step(&mut self, x: &[f64], y: f64, step_index: usize) -> Result<StepOutcome> {
        // Phase 1: random walk on the weights.
        let mut revived = Vec::new();
        if let Some(q) = &self.switching {
            let before = self.weights.clone();
            self.weights = q * &self.weights;
            for m in 0..self.n_experts() {
                if before[m] == 0.0 && self.weights[m] > 0.0 && !self.disabled[m] {
                    revived.push(m);
                }
            }
            for m in 0..self.n_experts() {
                if self.disabled[m] {
                    self.weights[m] = 0.0;
                }
            }
        }

        // Phase 2: random walk on the expert parameters.
        for (e, &off) in self.experts.iter_mut().zip(&self.disabled) {
            if !off {
                e.drift();
            }
        }

        // Phase 3: per-expert predictions and the mixture estimate.
        let mut dropped = Vec::new();
        let per_expert = self.per_expert_predictions(x)?;
        for (m, pred) in per_expert.iter().enumerate() {
            if !pred.mean.is_finite() || !pred.var.is_finite() {
                self.weights[m] = 0.0;
                self.disabled[m] = true;
                dropped.push(m);
            }
        }
        let prediction = self.mix(&per_expert);

        // Phase 4: multiplicative weight update in the log domain.
        let mut per_expert_log_lik = vec![f64::NEG_INFINITY; self.n_experts()];
        for (m, e) in self.experts.iter().enumerate() {
            if self.disabled[m] {
                continue;
            }
            per_expert_log_lik[m] = match e.likelihood {
                Likelihood::Gaussian => per_expert[m].log_density(y),
                Likelihood::Logistic => {
                    let p = per_expert[m].mean;
                    if y > 0.0 {
                        p.max(f64::MIN_POSITIVE).ln()
                    } else {
                        (1.0 - p).max(f64::MIN_POSITIVE).ln()
                    }
                }
            };
            if !per_expert_log_lik[m].is_finite() && self.weights[m] > 0.0 {
                self.weights[m] = 0.0;
                self.disabled[m] = true;
                dropped.push(m);
            }
        }

        let log_mixture_density = {
            let mut max = f64::NEG_INFINITY;
            for m in 0..self.n_experts() {
                if self.weights[m] > 0.0 {
                    max = max.max(self.weights[m].ln() + per_expert_log_lik[m]);
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::WeightUnderflow { step: step_index });
            }
            let mut acc = 0.0;
            for m in 0..self.n_experts() {
                if self.weights[m] > 0.0 {
                    acc += (self.weights[m].ln() + per_expert_log_lik[m] - max).exp();
                }
            }
            max + acc.ln()
        };

        for m in 0..self.n_experts() {
            if self.weights[m] > 0.0 {
                let logw = self.weights[m].ln() + per_expert_log_lik[m] - log_mixture_density;
                self.weights[m] = logw.exp();
            }
        }
        self.renormalize(step_index)?;

        // Phase 5: conjugate (or Laplace) correction of every live expert.
        for m in 0..self.n_experts() {
            if self.disabled[m] {
                continue;
            }
            let e = &mut self.experts[m];
            let phi = e.basis.featurize(x)?;
            let corrected = match e.likelihood {
                Likelihood::Gaussian => {
                    let pred = e.predict(&phi)?;
                    e.correct(&phi, y, &pred)
                }
                Likelihood::Logistic => e.laplace_step(&phi, y).map(|_| ()),
            };
            if corrected.is_err() {
                self.weights[m] = 0.0;
                self.disabled[m] = true;
                dropped.push(m);
            }
        }
        if dropped.iter().any(|&m| self.weights[m] == 0.0) {
            self.renormalize(step_index)?;
        }

        Ok(StepOutcome {
            prediction,
            per_expert_log_lik,
            log_mixture_density,
            dropped,
            revived,
        })
    }

    /// Normalizes to the simplex and applies the weight floor: entries that
    /// fall below it are set to exactly zero and the rest renormalized.
    fn renormalize(&mut self, step_index: usize) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::WeightUnderflow { step: step_index });
        }
        self.weights /= total;
        let mut floored = false;
        for w in self.weights.iter_mut() {
            if *w > 0.0 && *w < self.weight_floor {
                *w = 0.0;
                floored = true;
            }
        }
        if floored {
            let total: f64 = self.weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::WeightUnderflow { step: step_index });
            }
            self.weights /= total;
        }
        Ok(())
    }

    /// Experts whose weight is zero now but would be positive after one
    /// application of the switching matrix.
    pub fn revive_check(&self) -> Vec<usize> {
        let Some(q) = &self.switching else {
            return Vec::new();
        };
        let switched = q * &self.weights;
        (0..self.n_experts())
            .filter(|&m| self.weights[m] == 0.0 && switched[m] > 0.0 && !self.disabled[m])
            .collect()
    }
}

/// Uniform-mixing switching matrix `(1 - delta) I + (delta / M) J`: every
/// column sums to one and every expert leaks the same small probability to
/// all experts. Any such ergodic chain prevents permanent weight collapse.
pub fn uniform_switching_matrix(n_experts: usize, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("need 0 < delta < 1, got {delta}"),
        });
    }
    let m = n_experts;
    let mut q = DMatrix::from_element(m, m, delta / m as f64);
    for i in 0..m {
        q[(i, i)] += 1.0 - delta;
    }
    Ok(q)
}

/// Builds the block switching matrix that couples `R` copies of the same
/// `M` experts at different drift levels: `(1 - (R-1) delta) I_M` on the
/// diagonal blocks and `delta I_M` elsewhere, so each column sums to one.
/// For `R = 2` this is `[[(1-d)I, dI], [dI, (1-d)I]]`. `delta = 0` gives the
/// identity, reducing the ensemble to plain averaging with no revival.
pub fn block_switching_matrix(
    n_per_block: usize,
    n_blocks: usize,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if !(delta >= 0.0) || delta * (n_blocks as f64 - 1.0) >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("need 0 <= delta and delta*(R-1) < 1, got delta={delta}, R={n_blocks}"),
        });
    }
    let m = n_per_block;
    let total = m * n_blocks;
    let stay = 1.0 - delta * (n_blocks as f64 - 1.0);
    let mut q = DMatrix::zeros(total, total);
    for br in 0..n_blocks {
        for bc in 0..n_blocks {
            let v = if br == bc { stay } else { delta };
            for i in 0..m {
                q[(br * m + i, bc * m + i)] = v;
            }
        }
    }
    Ok(q)
}

/// Duplicates a set of experts into one block per drift level and couples the
/// blocks with [`block_switching_matrix`]. With levels `[sigma_rw^2, 0]` this
/// is the two-block ensemble of a dynamic and a static copy of each expert.
pub fn build_edoebe(
    base_experts: Vec<ExpertModel>,
    drift_levels: &[f64],
    delta: f64,
    weight_floor: f64,
) -> Result<EnsembleState> {
    if drift_levels.is_empty() {
        return Err(Error::InvalidParameter {
            name: "drift_levels",
            reason: "at least one drift level required".into(),
        });
    }
    let m = base_experts.len();
    let mut experts = Vec::with_capacity(m * drift_levels.len());
    for &level in drift_levels {
        if level < 0.0 {
            return Err(Error::InvalidParameter {
                name: "drift_levels",
                reason: format!("negative drift variance {level}"),
            });
        }
        for base in &base_experts {
            let mut e = base.clone();
            e.drift_var = level;
            experts.push(e);
        }
    }
    let n_blocks = drift_levels.len();
    let state = EnsembleState::new(experts, weight_floor)?;
    if n_blocks == 1 {
        return Ok(state);
    }
    state.with_switching(block_switching_matrix(m, n_blocks, delta)?)
}
