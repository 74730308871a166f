//! Exact conjugate Gaussian inference for a single basis-expansion expert:
//! one-point predict/correct recursion, random-walk drift on the weights,
//! marginal likelihood of a batch, and a recursive Laplace update for the
//! logistic likelihood.
//!
//! The weight posterior is kept as a dense mean/covariance pair; covariances
//! are re-symmetrized after every update. Feature dimensions stay small
//! enough (F up to a few hundred) that O(F^2) rank-1 updates dominate and no
//! square-root filtering is needed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisModel;
use crate::error::{Error, Result};
use crate::kernels::symmetrize;

/// Predictive variances below this are treated as a numerical failure rather
/// than divided through; it signals a mis-specified noise variance.
pub const MIN_PREDICTIVE_VAR: f64 = 1e-12;

const NEWTON_MAX_ITERS: usize = 20;
const NEWTON_TOL: f64 = 1e-9;

/// Gaussian posterior over expert weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianPosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Isotropic zero-mean prior `N(0, sigma_theta^2 I_F)`.
pub fn init_posterior(features: usize, prior_var: f64) -> Result<GaussianPosterior> {
    if !(prior_var > 0.0) {
        return Err(Error::InvalidParameter {
            name: "prior_var",
            reason: format!("must be positive, got {prior_var}"),
        });
    }
    Ok(GaussianPosterior {
        mean: DVector::zeros(features),
        cov: DMatrix::identity(features, features) * prior_var,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Likelihood {
    Gaussian,
    Logistic,
}

/// One-point Gaussian predictive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGaussian {
    pub mean: f64,
    pub var: f64,
}

impl PredictiveGaussian {
    pub fn log_density(&self, y: f64) -> f64 {
        let d = y - self.mean;
        -0.5 * ((2.0 * std::f64::consts::PI * self.var).ln() + d * d / self.var)
    }
}

/// Outcome of one recursive Laplace update.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceOutcome {
    /// Log predictive probability of the observed label, using the
    /// probit-style moment approximation of the logistic integral.
    pub log_predictive: f64,
    pub newton_converged: bool,
}

/// One expert: a frozen basis plus the running weight posterior and its
/// noise/drift variances. `drift_var = 0` is the static special case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertModel {
    pub basis: BasisModel,
    pub posterior: GaussianPosterior,
    pub noise_var: f64,
    pub drift_var: f64,
    pub likelihood: Likelihood,
}

impl ExpertModel {
    pub fn new(
        basis: BasisModel,
        prior_var: f64,
        noise_var: f64,
        drift_var: f64,
        likelihood: Likelihood,
    ) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_var",
                reason: format!("must be positive, got {noise_var}"),
            });
        }
        if !(drift_var >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "drift_var",
                reason: format!("must be non-negative, got {drift_var}"),
            });
        }
        let posterior = init_posterior(basis.feature_dim(), prior_var)?;
        Ok(Self {
            basis,
            posterior,
            noise_var,
            drift_var,
            likelihood,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.basis.feature_dim()
    }

    /// Latent moments `(phi' mu, phi' Sigma phi)` without observation noise.
    fn latent_moments(&self, phi: &DVector<f64>) -> (f64, f64) {
        let mean = phi.dot(&self.posterior.mean);
        let var = (phi.transpose() * &self.posterior.cov * phi)[(0, 0)];
        (mean, var.max(0.0))
    }

    /// Gaussian observation predictive `N(phi' mu, phi' Sigma phi + noise)`.
    pub fn predict(&self, phi: &DVector<f64>) -> Result<PredictiveGaussian> {
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "feature vector",
            });
        }
        let (mean, latent_var) = self.latent_moments(phi);
        Ok(PredictiveGaussian {
            mean,
            var: latent_var + self.noise_var,
        })
    }

    /// Predictive probability of label +1 under the logistic likelihood,
    /// via the moment approximation `sigmoid(m / sqrt(1 + pi s / 8))`.
    pub fn class_prob_positive(&self, phi: &DVector<f64>) -> f64 {
        let (m, s) = self.latent_moments(phi);
        sigmoid(m / (1.0 + std::f64::consts::PI * s / 8.0).sqrt())
    }

    /// Rank-1 conjugate correction on one observation. `predictive` must come
    /// from [`ExpertModel::predict`] on the same state and features.
    pub fn correct(
        &mut self,
        phi: &DVector<f64>,
        y: f64,
        predictive: &PredictiveGaussian,
    ) -> Result<()> {
        if predictive.var < MIN_PREDICTIVE_VAR {
            return Err(Error::DegenerateVariance {
                value: predictive.var,
            });
        }
        let cov_phi = &self.posterior.cov * phi;
        let gain = (y - predictive.mean) / predictive.var;
        self.posterior.mean += &cov_phi * gain;
        let scale = 1.0 / predictive.var;
        // Sigma <- Sigma - (Sigma phi)(Sigma phi)' / sigma_y^2
        self.posterior.cov.ger(-scale, &cov_phi, &cov_phi, 1.0);
        symmetrize(&mut self.posterior.cov);
        Ok(())
    }

    /// Random-walk drift: inflates the covariance by `drift_var * I`.
    pub fn drift(&mut self) {
        if self.drift_var > 0.0 {
            for i in 0..self.posterior.dim() {
                self.posterior.cov[(i, i)] += self.drift_var;
            }
        }
    }

    /// Recursive Laplace update for one `y in {-1, +1}` logistic observation.
    ///
    /// The single-step MAP lies on the line `mu + alpha Sigma phi`, so Newton
    /// runs on the scalar fixed point `alpha = y sigmoid(-y(m + alpha s))`.
    /// The precision then gains the likelihood Hessian `lambda phi phi'` at
    /// the MAP, applied to the covariance by Sherman-Morrison.
    pub fn laplace_step(&mut self, phi: &DVector<f64>, y: f64) -> Result<LaplaceOutcome> {
        if self.likelihood != Likelihood::Logistic {
            return Err(Error::InvalidParameter {
                name: "likelihood",
                reason: "laplace_step requires a logistic-likelihood expert".into(),
            });
        }
        if y != 1.0 && y != -1.0 {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("logistic label must be -1 or +1, got {y}"),
            });
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "feature vector",
            });
        }
        let (m, s) = self.latent_moments(phi);
        let log_predictive = log_sigmoid(y * m / (1.0 + std::f64::consts::PI * s / 8.0).sqrt());

        let mut alpha = 0.0;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let z = m + alpha * s;
            let target = y * sigmoid(-y * z);
            let denom = 1.0 + s * sigmoid(z) * sigmoid(-z);
            let step = (alpha - target) / denom;
            alpha -= step;
            if step.abs() < NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            // Gradient fallback: one fixed-point evaluation from the mean.
            alpha = y * sigmoid(-y * m);
        }

        let z_map = m + alpha * s;
        let lambda = sigmoid(z_map) * sigmoid(-z_map);
        let cov_phi = &self.posterior.cov * phi;
        self.posterior.mean += &cov_phi * alpha;
        let scale = lambda / (1.0 + lambda * s);
        self.posterior.cov.ger(-scale, &cov_phi, &cov_phi, 1.0);
        symmetrize(&mut self.posterior.cov);
        Ok(LaplaceOutcome {
            log_predictive,
            newton_converged: converged,
        })
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(z)` without overflow for large negative `z`.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Log marginal likelihood `ln N(y | 0, sigma_theta^2 Phi' Phi + sigma_eps^2 I)`
/// of a batch under the basis-expansion prior.
///
/// Uses the `F x F` dual form through the posterior precision when `F < N`,
/// and the `N x N` primal form otherwise; the two agree by the Woodbury
/// identity. A failed factorization is retried once with jitter.
pub fn log_evidence(
    basis: &BasisModel,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    prior_var: f64,
    noise_var: f64,
) -> Result<f64> {
    let n = inputs.ncols();
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "targets",
            reason: "at least one observation required".into(),
        });
    }
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    if !(prior_var > 0.0) || !(noise_var > 0.0) {
        return Err(Error::InvalidParameter {
            name: "prior_var/noise_var",
            reason: "variances must be positive".into(),
        });
    }
    let design = design_matrix(basis, inputs)?;
    log_evidence_from_design(&design, targets, prior_var, noise_var)
}

/// Stacks `phi(x_j)` columns into the `F x N` design matrix.
pub fn design_matrix(basis: &BasisModel, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = inputs.ncols();
    let mut design = DMatrix::zeros(basis.feature_dim(), n);
    for j in 0..n {
        let phi = basis.featurize(inputs.column(j).as_slice())?;
        design.set_column(j, &phi);
    }
    Ok(design)
}

/// Log marginal likelihood from a prebuilt design matrix, picking whichever
/// of the primal/dual forms factors the smaller matrix.
pub fn log_evidence_from_design(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    prior_var: f64,
    noise_var: f64,
) -> Result<f64> {
    if design.nrows() < design.ncols() {
        log_evidence_dual(design, targets, prior_var, noise_var)
    } else {
        log_evidence_primal(design, targets, prior_var, noise_var)
    }
}

fn log_evidence_primal(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    prior_var: f64,
    noise_var: f64,
) -> Result<f64> {
    let n = targets.len();
    let mut cov = design.transpose() * design * prior_var;
    for i in 0..n {
        cov[(i, i)] += noise_var;
    }
    let chol = cholesky_with_retry(cov, "marginal covariance")?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = targets.dot(&chol.solve(targets));
    Ok(-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}

fn log_evidence_dual(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    prior_var: f64,
    noise_var: f64,
) -> Result<f64> {
    let (f, n) = (design.nrows(), targets.len());
    // Posterior precision P = I/sigma_theta^2 + Phi Phi' / sigma_eps^2.
    let mut precision = design * design.transpose() / noise_var;
    for i in 0..f {
        precision[(i, i)] += 1.0 / prior_var;
    }
    let chol = cholesky_with_retry(precision, "posterior precision")?;
    let log_det_p = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let b = design * targets / noise_var;
    let quad = targets.dot(targets) / noise_var - b.dot(&chol.solve(&b));
    let log_det = n as f64 * noise_var.ln() + f as f64 * prior_var.ln() + log_det_p;
    Ok(-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}

fn cholesky_with_retry(
    mut m: DMatrix<f64>,
    context: &'static str,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    match m.clone().cholesky() {
        Some(c) => Ok(c),
        None => {
            let mean_diag = m.diagonal().iter().sum::<f64>() / m.nrows() as f64;
            let jitter = 1e-10 * mean_diag.abs().max(1.0);
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            m.cholesky().ok_or(Error::NotPositiveDefinite { context })
        }
    }
}
