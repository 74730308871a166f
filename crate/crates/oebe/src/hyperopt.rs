//! Empirical-Bayes pretraining: multi-start first-order optimization of the
//! log marginal likelihood over unconstrained hyperparameters, a Laplace
//! approximation at each fitted mode for sampling diverse hyperparameter
//! sets, and assembly of the resulting experts into an ensemble.
//!
//! Positive hyperparameters (variances, length scales) are log-transformed;
//! free parameters such as RBF centers or optimized frequencies pass through
//! unchanged. All hyperparameters are frozen once assembly finishes; nothing
//! is retrained online.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{
    build_hsgp_additive, build_linear, build_polynomial_additive, build_rff_from_base, kmeans,
    sample_rff_base, BasisModel, HsgpDomain,
};
use crate::bayes_linear::{design_matrix, log_evidence_from_design, ExpertModel, Likelihood};
use crate::ensemble::{block_switching_matrix, uniform_switching_matrix, EnsembleState};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};

/// Hessians are only computed up to this many hyperparameters; above it the
/// sampler falls back to isotropic perturbation.
pub const HESSIAN_PARAM_LIMIT: usize = 50;

/// Variance of the isotropic fallback perturbation in unconstrained space.
pub const FALLBACK_PERTURBATION_VAR: f64 = 1e-3;

const GRAD_STEP: f64 = 1e-5;
const HESS_STEP: f64 = 1e-4;
const MAX_HALVINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Log,
    Identity,
}

/// Unconstrained hyperparameter vector with its per-coordinate transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperVector {
    pub values: Vec<f64>,
    pub transforms: Vec<Transform>,
}

impl HyperVector {
    /// Maps constrained parameters into the unconstrained space.
    pub fn from_constrained(params: &[f64], transforms: Vec<Transform>) -> Result<Self> {
        if params.len() != transforms.len() {
            return Err(Error::DimensionMismatch {
                expected: transforms.len(),
                got: params.len(),
            });
        }
        let values = params
            .iter()
            .zip(&transforms)
            .map(|(&p, t)| match t {
                Transform::Log => {
                    if p > 0.0 {
                        Ok(p.ln())
                    } else {
                        Err(Error::InvalidParameter {
                            name: "params",
                            reason: format!("log-transformed parameter must be positive, got {p}"),
                        })
                    }
                }
                Transform::Identity => Ok(p),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values, transforms })
    }

    /// Maps back to the constrained space.
    pub fn constrain(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| match t {
                Transform::Log => v.exp(),
                Transform::Identity => v,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Basis family to fit, with its structural (non-fitted) choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisFamily {
    Linear {
        intercept: bool,
    },
    PolynomialAdditive {
        degree: usize,
    },
    RbfNetwork {
        n_centers: usize,
        optimize_centers: bool,
    },
    Rff {
        kernel: KernelFamily,
        features: usize,
        /// Optimized Fourier features: the frequencies join the
        /// hyperparameter vector (length scales then drop out, having been
        /// consumed by the initialization).
        optimize_frequencies: bool,
    },
    HsgpAdditive {
        kernel: KernelFamily,
        features_per_dim: usize,
        domain_scale: f64,
    },
}

impl BasisFamily {
    /// Whether the family carries ARD length scales worth multi-starting.
    fn has_lengthscales(&self) -> bool {
        !matches!(
            self,
            BasisFamily::Linear { .. } | BasisFamily::PolynomialAdditive { .. }
        )
    }
}

/// Frozen per-family randomness and geometry: frequency draws, initial
/// centers, the Hilbert-space domain. Built once per family from the
/// pretraining inputs, shared by every mode and sample of that family.
#[derive(Debug, Clone)]
pub struct FamilyContext {
    pub family: BasisFamily,
    pub dim: usize,
    rff_base: Option<DMatrix<f64>>,
    init_centers: Option<DMatrix<f64>>,
    domain: Option<HsgpDomain>,
}

impl FamilyContext {
    pub fn build<R: Rng>(
        family: BasisFamily,
        pretrain: &DMatrix<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let dim = pretrain.nrows();
        let mut ctx = Self {
            family: family.clone(),
            dim,
            rff_base: None,
            init_centers: None,
            domain: None,
        };
        match family {
            BasisFamily::Linear { .. } | BasisFamily::PolynomialAdditive { .. } => {}
            BasisFamily::Rff {
                kernel, features, ..
            } => {
                if features == 0 || features % 2 != 0 {
                    return Err(Error::InvalidParameter {
                        name: "features",
                        reason: format!("feature count must be even and positive, got {features}"),
                    });
                }
                ctx.rff_base = Some(sample_rff_base(kernel, dim, features / 2, rng));
            }
            BasisFamily::RbfNetwork { n_centers, .. } => {
                if pretrain.ncols() < n_centers {
                    return Err(Error::InvalidParameter {
                        name: "n_centers",
                        reason: format!(
                            "{} pretraining points cannot seed {n_centers} centers",
                            pretrain.ncols()
                        ),
                    });
                }
                ctx.init_centers = Some(kmeans(pretrain, n_centers, rng));
            }
            BasisFamily::HsgpAdditive {
                features_per_dim,
                domain_scale,
                ..
            } => {
                ctx.domain = Some(HsgpDomain::from_data(
                    pretrain,
                    domain_scale,
                    vec![features_per_dim; dim],
                )?);
            }
        }
        Ok(ctx)
    }

    /// Transform layout: `[prior_var, noise_var]` then the family parameters.
    pub fn transforms(&self) -> Vec<Transform> {
        let mut t = vec![Transform::Log, Transform::Log];
        match &self.family {
            BasisFamily::Linear { .. } | BasisFamily::PolynomialAdditive { .. } => {}
            BasisFamily::Rff {
                features,
                optimize_frequencies,
                ..
            } => {
                if *optimize_frequencies {
                    t.extend(std::iter::repeat_n(
                        Transform::Identity,
                        self.dim * features / 2,
                    ));
                } else {
                    t.extend(std::iter::repeat_n(Transform::Log, self.dim));
                }
            }
            BasisFamily::RbfNetwork {
                n_centers,
                optimize_centers,
            } => {
                t.extend(std::iter::repeat_n(Transform::Log, self.dim));
                if *optimize_centers {
                    t.extend(std::iter::repeat_n(
                        Transform::Identity,
                        self.dim * n_centers,
                    ));
                }
            }
            BasisFamily::HsgpAdditive { .. } => {
                t.extend(std::iter::repeat_n(Transform::Log, self.dim));
            }
        }
        t
    }

    /// Initial constrained parameters: the given variances plus length scales
    /// `l_d = s * (max x_d - min x_d)` over the pretraining window.
    pub fn initial_params(
        &self,
        pretrain: &DMatrix<f64>,
        s: f64,
        prior_var: f64,
        noise_var: f64,
    ) -> Vec<f64> {
        let mut params = vec![prior_var, noise_var];
        let ranges: Vec<f64> = (0..self.dim)
            .map(|d| {
                let (lo, hi) = pretrain
                    .row(d)
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                (hi - lo).max(1e-6)
            })
            .collect();
        match &self.family {
            BasisFamily::Linear { .. } | BasisFamily::PolynomialAdditive { .. } => {}
            BasisFamily::Rff {
                optimize_frequencies,
                ..
            } => {
                if *optimize_frequencies {
                    // Frequencies start at the sampler's draw for l = s * range.
                    let base = self.rff_base.as_ref().unwrap();
                    for m in 0..base.ncols() {
                        for d in 0..self.dim {
                            params.push(base[(d, m)] / (s * ranges[d]));
                        }
                    }
                } else {
                    params.extend(ranges.iter().map(|r| s * r));
                }
            }
            BasisFamily::RbfNetwork {
                optimize_centers, ..
            } => {
                params.extend(ranges.iter().map(|r| s * r));
                if *optimize_centers {
                    let centers = self.init_centers.as_ref().unwrap();
                    for k in 0..centers.ncols() {
                        for d in 0..self.dim {
                            params.push(centers[(d, k)]);
                        }
                    }
                }
            }
            BasisFamily::HsgpAdditive { .. } => {
                params.extend(ranges.iter().map(|r| s * r));
            }
        }
        params
    }

    /// Builds the frozen basis for one constrained parameter vector.
    pub fn build_basis(&self, params: &[f64]) -> Result<BasisModel> {
        match &self.family {
            BasisFamily::Linear { intercept } => build_linear(self.dim, *intercept),
            BasisFamily::PolynomialAdditive { degree } => {
                build_polynomial_additive(self.dim, *degree)
            }
            BasisFamily::Rff {
                kernel,
                features,
                optimize_frequencies,
            } => {
                if *optimize_frequencies {
                    let pairs = features / 2;
                    let mut frequencies = DMatrix::zeros(self.dim, pairs);
                    for m in 0..pairs {
                        for d in 0..self.dim {
                            frequencies[(d, m)] = params[2 + m * self.dim + d];
                        }
                    }
                    Ok(BasisModel::Rff {
                        frequencies,
                        process_scale: 1.0,
                    })
                } else {
                    let lengthscales = params[2..2 + self.dim].to_vec();
                    let spec = KernelSpec::new(*kernel, lengthscales, 1.0)?;
                    build_rff_from_base(&spec, self.rff_base.as_ref().unwrap())
                }
            }
            BasisFamily::RbfNetwork {
                n_centers,
                optimize_centers,
            } => {
                let lengthscales = params[2..2 + self.dim].to_vec();
                let centers = if *optimize_centers {
                    let mut centers = DMatrix::zeros(self.dim, *n_centers);
                    let offset = 2 + self.dim;
                    for k in 0..*n_centers {
                        for d in 0..self.dim {
                            centers[(d, k)] = params[offset + k * self.dim + d];
                        }
                    }
                    centers
                } else {
                    self.init_centers.as_ref().unwrap().clone()
                };
                Ok(BasisModel::RbfNetwork {
                    centers,
                    lengthscales,
                })
            }
            BasisFamily::HsgpAdditive { kernel, .. } => {
                let lengthscales = params[2..2 + self.dim].to_vec();
                let spec = KernelSpec::new(*kernel, lengthscales, 1.0)?;
                build_hsgp_additive(&spec, self.domain.as_ref().unwrap())
            }
        }
    }
}

/// Gradient-descent budget for one mode fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerBudget {
    pub steps: usize,
    pub step_size: f64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            steps: 500,
            step_size: 1e-2,
        }
    }
}

/// One local optimum of the log evidence.
#[derive(Debug, Clone)]
pub struct FittedMode {
    pub eta: HyperVector,
    pub log_evidence: f64,
    /// Hessian of the negative log evidence at the mode, in unconstrained
    /// space. Absent when the parameter count exceeds [`HESSIAN_PARAM_LIMIT`].
    pub hessian: Option<DMatrix<f64>>,
    /// Set when optimization had to stop early and returned its best-so-far.
    pub flagged: bool,
}

/// Negative log evidence with a one-entry design cache: perturbing only the
/// two variance coordinates reuses the current design matrix, which makes the
/// finite-difference loop cheap for variance-heavy layouts.
struct EvidenceObjective<'a> {
    ctx: &'a FamilyContext,
    inputs: &'a DMatrix<f64>,
    targets: &'a DVector<f64>,
    cached: Option<(Vec<f64>, DMatrix<f64>)>,
}

impl<'a> EvidenceObjective<'a> {
    fn new(ctx: &'a FamilyContext, inputs: &'a DMatrix<f64>, targets: &'a DVector<f64>) -> Self {
        Self {
            ctx,
            inputs,
            targets,
            cached: None,
        }
    }

    /// Negative log evidence; `None` when the evaluation is non-finite.
    fn eval(&mut self, eta: &HyperVector) -> Option<f64> {
        let params = eta.constrain();
        if params.iter().any(|p| !p.is_finite()) {
            return None;
        }
        let family_part = params[2..].to_vec();
        let design = match &self.cached {
            Some((key, design)) if *key == family_part => design,
            _ => {
                let basis = self.ctx.build_basis(&params).ok()?;
                let design = design_matrix(&basis, self.inputs).ok()?;
                self.cached = Some((family_part, design));
                &self.cached.as_ref().unwrap().1
            }
        };
        let value = log_evidence_from_design(design, self.targets, params[0], params[1]).ok()?;
        value.is_finite().then_some(-value)
    }

    fn gradient(&mut self, eta: &HyperVector) -> Option<Vec<f64>> {
        let mut grad = vec![0.0; eta.len()];
        let mut probe = eta.clone();
        for (i, slot) in grad.iter_mut().enumerate() {
            let h = GRAD_STEP * eta.values[i].abs().max(1.0);
            probe.values[i] = eta.values[i] + h;
            let plus = self.eval(&probe)?;
            probe.values[i] = eta.values[i] - h;
            let minus = self.eval(&probe)?;
            probe.values[i] = eta.values[i];
            *slot = (plus - minus) / (2.0 * h);
        }
        Some(grad)
    }
}

/// Fits one mode of the log evidence by Adam over the unconstrained
/// hyperparameters, full-batch over the pretraining window. Non-finite
/// evaluations halve the step size and restart from the best point so far;
/// after repeated failures the best-so-far is returned flagged.
pub fn fit_mode(
    ctx: &FamilyContext,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    eta0: HyperVector,
    budget: OptimizerBudget,
) -> Result<FittedMode> {
    if budget.steps == 0 {
        return Err(Error::InvalidParameter {
            name: "budget",
            reason: "step budget must be positive".into(),
        });
    }
    let mut objective = EvidenceObjective::new(ctx, inputs, targets);
    let initial = objective.eval(&eta0).ok_or_else(|| {
        Error::Config("evidence is not finite at the initial hyperparameters".into())
    })?;

    let mut best = (eta0.clone(), initial);
    let mut eta = eta0;
    let mut lr = budget.step_size;
    let mut halvings = 0;
    let mut flagged = false;

    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; eta.len()];
    let mut v = vec![0.0; eta.len()];
    let mut t = 0;

    let mut step = 0;
    while step < budget.steps {
        step += 1;
        let grad = match objective.gradient(&eta) {
            Some(g) => g,
            None => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    flagged = true;
                    break;
                }
                lr *= 0.5;
                eta = best.0.clone();
                m.iter_mut().for_each(|x| *x = 0.0);
                v.iter_mut().for_each(|x| *x = 0.0);
                t = 0;
                continue;
            }
        };
        t += 1;
        for i in 0..eta.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / (1.0 - beta1.powi(t));
            let v_hat = v[i] / (1.0 - beta2.powi(t));
            eta.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        match objective.eval(&eta) {
            Some(value) => {
                if value < best.1 {
                    best = (eta.clone(), value);
                }
            }
            None => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    flagged = true;
                    break;
                }
                lr *= 0.5;
                eta = best.0.clone();
                m.iter_mut().for_each(|x| *x = 0.0);
                v.iter_mut().for_each(|x| *x = 0.0);
                t = 0;
            }
        }
    }

    let (eta, neg_evidence) = best;
    let hessian = if eta.len() <= HESSIAN_PARAM_LIMIT {
        hessian_at(&mut objective, &eta)
    } else {
        None
    };
    Ok(FittedMode {
        eta,
        log_evidence: -neg_evidence,
        hessian,
        flagged,
    })
}

/// Hessian of the negative log evidence by central differences of the
/// finite-difference gradient; symmetrized.
fn hessian_at(objective: &mut EvidenceObjective<'_>, eta: &HyperVector) -> Option<DMatrix<f64>> {
    let p = eta.len();
    let mut hess = DMatrix::zeros(p, p);
    let mut probe = eta.clone();
    for j in 0..p {
        let h = HESS_STEP * eta.values[j].abs().max(1.0);
        probe.values[j] = eta.values[j] + h;
        let g_plus = objective.gradient(&probe)?;
        probe.values[j] = eta.values[j] - h;
        let g_minus = objective.gradient(&probe)?;
        probe.values[j] = eta.values[j];
        for i in 0..p {
            hess[(i, j)] = (g_plus[i] - g_minus[i]) / (2.0 * h);
        }
    }
    let transposed = hess.transpose();
    Some((hess + transposed) * 0.5)
}

/// Runs one fit per entry of the `s` grid and returns the modes sorted by
/// evidence, best first. Families without length scales collapse to a single
/// fit.
pub fn fit_multi_start(
    ctx: &FamilyContext,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    s_grid: &[f64],
    prior_var_init: f64,
    noise_var_init: f64,
    budget: OptimizerBudget,
) -> Result<Vec<FittedMode>> {
    let starts: Vec<f64> = if ctx.family.has_lengthscales() {
        s_grid.to_vec()
    } else {
        vec![1.0]
    };
    if starts.is_empty() {
        return Err(Error::Config("empty multi-start grid".into()));
    }
    let transforms = ctx.transforms();
    let mut modes = Vec::with_capacity(starts.len());
    for &s in &starts {
        let params = ctx.initial_params(inputs, s, prior_var_init, noise_var_init);
        let eta0 = HyperVector::from_constrained(&params, transforms.clone())?;
        modes.push(fit_mode(ctx, inputs, targets, eta0, budget)?);
    }
    modes.sort_by(|a, b| b.log_evidence.total_cmp(&a.log_evidence));
    Ok(modes)
}

/// Draws `count` hyperparameter sets from the Laplace approximation
/// `N(eta*, H^-1)` in unconstrained space. The mode itself is always kept by
/// the caller in addition to these draws. When the Hessian is absent or not
/// positive definite after jitter, falls back to isotropic white-noise
/// perturbation with variance 1e-3.
pub fn sample_hyperparams<R: Rng>(
    mode: &FittedMode,
    count: usize,
    rng: &mut R,
) -> Vec<HyperVector> {
    if count == 0 {
        return Vec::new();
    }
    let p = mode.eta.len();
    let normal = Normal::new(0.0, 1.0).unwrap();

    let chol = mode.hessian.as_ref().and_then(|h| {
        let mut jittered = h.clone();
        for i in 0..p {
            jittered[(i, i)] += 1e-6;
        }
        jittered.cholesky()
    });

    (0..count)
        .map(|_| {
            let z = DVector::from_fn(p, |_, _| normal.sample(rng));
            let offset = match &chol {
                // cov = H^-1: solve L' u = z so that u ~ N(0, (L L')^-1).
                Some(c) => c
                    .l()
                    .transpose()
                    .solve_upper_triangular(&z)
                    .unwrap_or_else(|| z.clone() * FALLBACK_PERTURBATION_VAR.sqrt()),
                None => z.clone() * FALLBACK_PERTURBATION_VAR.sqrt(),
            };
            let candidate = HyperVector {
                values: mode
                    .eta
                    .values
                    .iter()
                    .zip(offset.iter())
                    .map(|(m, o)| m + o)
                    .collect(),
                transforms: mode.eta.transforms.clone(),
            };
            // Flat evidence directions give the Laplace Gaussian enormous
            // variance; a draw whose constrained value overflows or
            // underflows is replaced by the isotropic perturbation.
            if constrained_values_valid(&candidate) {
                candidate
            } else {
                HyperVector {
                    values: mode
                        .eta
                        .values
                        .iter()
                        .zip(z.iter())
                        .map(|(m, o)| m + o * FALLBACK_PERTURBATION_VAR.sqrt())
                        .collect(),
                    transforms: mode.eta.transforms.clone(),
                }
            }
        })
        .collect()
}

fn constrained_values_valid(eta: &HyperVector) -> bool {
    eta.constrain()
        .iter()
        .zip(&eta.transforms)
        .all(|(p, t)| match t {
            Transform::Log => *p > 0.0 && p.is_finite(),
            Transform::Identity => p.is_finite(),
        })
}

/// How the assembled experts are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SwitchingKind {
    /// Plain averaging: weights evolve only through the Bayes update.
    None,
    /// Uniform ergodic mixing with probability `delta`.
    Uniform { delta: f64 },
    /// Drift-level blocks coupled with probability `delta` (one block per
    /// entry of `drift_levels`).
    Blocks { delta: f64 },
}

/// Everything assembly needs besides the data: which families to fit, how to
/// diversify them, and how the ensemble treats drift and switching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDeclaration {
    pub family: BasisFamily,
    /// Length-scale multipliers for multi-start initialization.
    pub s_grid: Vec<f64>,
    /// Total experts per fitted mode: the mode plus `samples_per_mode - 1`
    /// Laplace draws.
    pub samples_per_mode: usize,
    pub budget: OptimizerBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub families: Vec<FamilyDeclaration>,
    pub prior_var_init: f64,
    pub noise_var_init: f64,
    /// Drift variance per block. A single `[0.0]` is a static ensemble; with
    /// `SwitchingKind::Blocks` every entry becomes one block of experts.
    pub drift_levels: Vec<f64>,
    pub switching: SwitchingKind,
    pub weight_floor: f64,
    pub likelihood: Likelihood,
}

/// Report of one assembled family, for diagnostics and logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFitReport {
    pub evidences: Vec<f64>,
    pub flagged: bool,
    pub n_experts: usize,
}

/// Fits every declared family on the pretraining window, samples
/// hyperparameter sets at each mode, and builds the ensemble. Hyperparameters
/// are frozen from here on.
pub fn assemble_ensemble<R: Rng>(
    config: &AssemblyConfig,
    pretrain_inputs: &DMatrix<f64>,
    pretrain_targets: &DVector<f64>,
    rng: &mut R,
) -> Result<(EnsembleState, Vec<FamilyFitReport>)> {
    if config.families.is_empty() {
        return Err(Error::Config("no basis families declared".into()));
    }
    if config.drift_levels.is_empty() {
        return Err(Error::Config("at least one drift level required".into()));
    }

    let mut base_experts = Vec::new();
    let mut reports = Vec::new();
    for decl in &config.families {
        if decl.samples_per_mode == 0 {
            return Err(Error::Config("samples_per_mode must be at least 1".into()));
        }
        let ctx = FamilyContext::build(decl.family.clone(), pretrain_inputs, rng)?;
        let modes = fit_multi_start(
            &ctx,
            pretrain_inputs,
            pretrain_targets,
            &decl.s_grid,
            config.prior_var_init,
            config.noise_var_init,
            decl.budget,
        )?;
        let mut report = FamilyFitReport {
            evidences: modes.iter().map(|m| m.log_evidence).collect(),
            flagged: modes.iter().any(|m| m.flagged),
            n_experts: 0,
        };
        for mode in &modes {
            let mut etas = vec![mode.eta.clone()];
            etas.extend(sample_hyperparams(mode, decl.samples_per_mode - 1, rng));
            for eta in etas {
                let params = eta.constrain();
                let basis = ctx.build_basis(&params)?;
                base_experts.push(ExpertModel::new(
                    basis,
                    params[0],
                    params[1],
                    0.0,
                    config.likelihood,
                )?);
                report.n_experts += 1;
            }
        }
        reports.push(report);
    }

    let state = match config.switching {
        SwitchingKind::None | SwitchingKind::Uniform { .. } => {
            for e in &mut base_experts {
                e.drift_var = config.drift_levels[0];
            }
            let state = EnsembleState::new(base_experts, config.weight_floor)?;
            match config.switching {
                SwitchingKind::Uniform { delta } => {
                    let m = state.n_experts();
                    state.with_switching(uniform_switching_matrix(m, delta)?)?
                }
                _ => state,
            }
        }
        SwitchingKind::Blocks { delta } => {
            if config.drift_levels.len() == 1 {
                return Err(Error::Config(
                    "block switching needs at least two drift levels".into(),
                ));
            }
            let m = base_experts.len();
            let n_blocks = config.drift_levels.len();
            let mut experts = Vec::with_capacity(m * n_blocks);
            for &level in &config.drift_levels {
                for base in &base_experts {
                    let mut e = base.clone();
                    e.drift_var = level;
                    experts.push(e);
                }
            }
            EnsembleState::new(experts, config.weight_floor)?
                .with_switching(block_switching_matrix(m, n_blocks, delta)?)?
        }
    };
    Ok((state, reports))
}

/// Splits records into a `D x N` input matrix and target vector.
pub fn to_matrix(records: &[crate::data::StreamRecord]) -> (DMatrix<f64>, DVector<f64>) {
    let n = records.len();
    let dim = records.first().map_or(0, |r| r.x.len());
    let inputs = DMatrix::from_fn(dim, n, |d, j| records[j].x[d]);
    let targets = DVector::from_fn(n, |j, _| records[j].y);
    (inputs, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_linear::log_evidence;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_dataset(n: usize, noise_std: f64, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let theta = [0.8, -1.2, 0.4];
        let inputs = DMatrix::from_fn(2, n, |_, _| normal.sample(&mut rng));
        let targets = DVector::from_fn(n, |j, _| {
            theta[0]
                + theta[1] * inputs[(0, j)]
                + theta[2] * inputs[(1, j)]
                + noise_std * normal.sample(&mut rng)
        });
        (inputs, targets)
    }

    #[test]
    fn transform_round_trips_positive_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let params: Vec<f64> = (0..6).map(|_| rng.random_range(1e-6..1e4)).collect();
            let transforms = vec![Transform::Log; 6];
            let eta = HyperVector::from_constrained(&params, transforms).unwrap();
            for (orig, back) in params.iter().zip(eta.constrain()) {
                assert_relative_eq!(*orig, back, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn log_transform_rejects_non_positive_values() {
        assert!(HyperVector::from_constrained(&[0.0], vec![Transform::Log]).is_err());
        assert!(HyperVector::from_constrained(&[-1.0], vec![Transform::Log]).is_err());
    }

    #[test]
    fn fit_recovers_noise_variance_on_well_specified_data() {
        let (inputs, targets) = linear_dataset(600, 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ctx = FamilyContext::build(BasisFamily::Linear { intercept: true }, &inputs, &mut rng)
            .unwrap();
        let eta0 = HyperVector::from_constrained(&[1.0, 0.25], ctx.transforms()).unwrap();
        let mode = fit_mode(
            &ctx,
            &inputs,
            &targets,
            eta0,
            OptimizerBudget {
                steps: 400,
                step_size: 1e-2,
            },
        )
        .unwrap();
        let params = mode.eta.constrain();
        let noise_var = params[1];
        assert!(
            (noise_var - 0.25).abs() < 0.05,
            "recovered noise variance {noise_var}"
        );
        assert!(!mode.flagged);
    }

    #[test]
    fn fit_never_returns_worse_than_the_start() {
        let (inputs, targets) = linear_dataset(200, 1.0, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ctx = FamilyContext::build(
            BasisFamily::Rff {
                kernel: KernelFamily::SeArd,
                features: 20,
                optimize_frequencies: false,
            },
            &inputs,
            &mut rng,
        )
        .unwrap();
        let params0 = ctx.initial_params(&inputs, 1.0, 1.0, 0.25);
        let eta0 = HyperVector::from_constrained(&params0, ctx.transforms()).unwrap();
        let basis0 = ctx.build_basis(&params0).unwrap();
        let start = log_evidence(&basis0, &inputs, &targets, params0[0], params0[1]).unwrap();
        let mode = fit_mode(
            &ctx,
            &inputs,
            &targets,
            eta0,
            OptimizerBudget {
                steps: 60,
                step_size: 1e-2,
            },
        )
        .unwrap();
        assert!(mode.log_evidence >= start);
    }

    #[test]
    fn multi_start_is_sorted_by_evidence() {
        let (inputs, targets) = linear_dataset(150, 0.7, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ctx = FamilyContext::build(
            BasisFamily::HsgpAdditive {
                kernel: KernelFamily::SeArd,
                features_per_dim: 8,
                domain_scale: 1.5,
            },
            &inputs,
            &mut rng,
        )
        .unwrap();
        let modes = fit_multi_start(
            &ctx,
            &inputs,
            &targets,
            &[0.1, 1.0, 10.0],
            1.0,
            0.25,
            OptimizerBudget {
                steps: 40,
                step_size: 1e-2,
            },
        )
        .unwrap();
        assert_eq!(modes.len(), 3);
        for w in modes.windows(2) {
            assert!(w[0].log_evidence >= w[1].log_evidence);
        }
    }

    #[test]
    fn sampling_zero_returns_no_draws() {
        let (inputs, targets) = linear_dataset(100, 0.5, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ctx = FamilyContext::build(BasisFamily::Linear { intercept: true }, &inputs, &mut rng)
            .unwrap();
        let eta0 = HyperVector::from_constrained(&[1.0, 0.25], ctx.transforms()).unwrap();
        let mode = fit_mode(
            &ctx,
            &inputs,
            &targets,
            eta0,
            OptimizerBudget {
                steps: 50,
                step_size: 1e-2,
            },
        )
        .unwrap();
        assert!(sample_hyperparams(&mode, 0, &mut rng).is_empty());
    }

    #[test]
    fn sampled_hyperparameters_have_sane_evidence() {
        let (inputs, targets) = linear_dataset(300, 0.5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ctx = FamilyContext::build(
            BasisFamily::Rff {
                kernel: KernelFamily::SeArd,
                features: 16,
                optimize_frequencies: false,
            },
            &inputs,
            &mut rng,
        )
        .unwrap();
        let params0 = ctx.initial_params(&inputs, 1.0, 1.0, 0.25);
        let eta0 = HyperVector::from_constrained(&params0, ctx.transforms()).unwrap();
        let mode = fit_mode(
            &ctx,
            &inputs,
            &targets,
            eta0,
            OptimizerBudget {
                steps: 120,
                step_size: 1e-2,
            },
        )
        .unwrap();
        assert!(mode.hessian.is_some());
        let samples = sample_hyperparams(&mode, 9, &mut rng);
        assert_eq!(samples.len(), 9);
        for eta in &samples {
            let params = eta.constrain();
            let basis = ctx.build_basis(&params).unwrap();
            let ev = log_evidence(&basis, &inputs, &targets, params[0], params[1]).unwrap();
            assert!(ev.is_finite());
            assert!(
                (mode.log_evidence - ev).abs() < 1e4,
                "sampled evidence {ev} too far from mode {}",
                mode.log_evidence
            );
        }
    }

    #[test]
    fn optimized_frequencies_join_the_hyperparameter_vector() {
        let (inputs, targets) = linear_dataset(250, 0.5, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let ctx = FamilyContext::build(
            BasisFamily::Rff {
                kernel: KernelFamily::SeArd,
                features: 12,
                optimize_frequencies: true,
            },
            &inputs,
            &mut rng,
        )
        .unwrap();
        // Two variances plus D * F/2 free frequencies.
        assert_eq!(ctx.transforms().len(), 2 + 2 * 6);
        assert!(ctx.transforms()[2..]
            .iter()
            .all(|t| *t == Transform::Identity));

        let params0 = ctx.initial_params(&inputs, 1.0, 1.0, 0.25);
        let eta0 = HyperVector::from_constrained(&params0, ctx.transforms()).unwrap();
        let basis0 = ctx.build_basis(&params0).unwrap();
        let start = log_evidence(&basis0, &inputs, &targets, params0[0], params0[1]).unwrap();
        let mode = fit_mode(
            &ctx,
            &inputs,
            &targets,
            eta0,
            OptimizerBudget {
                steps: 60,
                step_size: 1e-2,
            },
        )
        .unwrap();
        assert!(mode.log_evidence >= start);
        // The fit moved the frequencies themselves.
        let fitted = mode.eta.constrain();
        assert!(params0[2..]
            .iter()
            .zip(&fitted[2..])
            .any(|(a, b)| (a - b).abs() > 1e-6));
        let basis = ctx.build_basis(&fitted).unwrap();
        assert_eq!(basis.feature_dim(), 12);
    }

    #[test]
    fn hessian_is_skipped_above_the_parameter_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (inputs, targets) = linear_dataset(120, 0.5, 13);
        let ctx = FamilyContext::build(
            BasisFamily::RbfNetwork {
                n_centers: 40,
                optimize_centers: true,
            },
            &inputs,
            &mut rng,
        )
        .unwrap();
        // 2 + 2 + 80 parameters: beyond the Hessian limit.
        assert!(ctx.transforms().len() > HESSIAN_PARAM_LIMIT);
        let params0 = ctx.initial_params(&inputs, 1.0, 1.0, 0.25);
        let eta0 = HyperVector::from_constrained(&params0, ctx.transforms()).unwrap();
        let mode = fit_mode(
            &ctx,
            &inputs,
            &targets,
            eta0,
            OptimizerBudget {
                steps: 3,
                step_size: 1e-2,
            },
        )
        .unwrap();
        assert!(mode.hessian.is_none());
        // Sampler still works through the isotropic fallback.
        let draws = sample_hyperparams(&mode, 2, &mut rng);
        assert_eq!(draws.len(), 2);
    }

    fn small_assembly(samples_per_mode: usize) -> AssemblyConfig {
        AssemblyConfig {
            families: vec![FamilyDeclaration {
                family: BasisFamily::Rff {
                    kernel: KernelFamily::SeArd,
                    features: 16,
                    optimize_frequencies: false,
                },
                s_grid: vec![1.0],
                samples_per_mode,
                budget: OptimizerBudget {
                    steps: 30,
                    step_size: 1e-2,
                },
            }],
            prior_var_init: 1.0,
            noise_var_init: 0.25,
            drift_levels: vec![0.0],
            switching: SwitchingKind::None,
            weight_floor: crate::ensemble::DEFAULT_WEIGHT_FLOOR,
            likelihood: Likelihood::Gaussian,
        }
    }

    #[test]
    fn single_family_mode_only_gives_one_expert() {
        let (inputs, targets) = linear_dataset(200, 0.5, 14);
        let mut config = small_assembly(1);
        config.families[0].family = BasisFamily::Linear { intercept: true };
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (state, reports) = assemble_ensemble(&config, &inputs, &targets, &mut rng).unwrap();
        assert_eq!(state.n_experts(), 1);
        assert_eq!(reports[0].n_experts, 1);
    }

    #[test]
    fn mode_plus_samples_gives_the_declared_count() {
        let (inputs, targets) = linear_dataset(200, 0.5, 16);
        let config = small_assembly(10);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (state, _) = assemble_ensemble(&config, &inputs, &targets, &mut rng).unwrap();
        assert_eq!(state.n_experts(), 10);
    }

    #[test]
    fn block_assembly_duplicates_experts() {
        let (inputs, targets) = linear_dataset(200, 0.5, 18);
        let mut config = small_assembly(2);
        config.drift_levels = vec![1e-3, 0.0];
        config.switching = SwitchingKind::Blocks { delta: 0.05 };
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let (state, _) = assemble_ensemble(&config, &inputs, &targets, &mut rng).unwrap();
        assert_eq!(state.n_experts(), 4);
        assert!(state.switching.is_some());
        assert_eq!(state.experts[0].drift_var, 1e-3);
        assert_eq!(state.experts[2].drift_var, 0.0);
    }

    #[test]
    fn assembly_is_deterministic_under_a_fixed_seed() {
        let (inputs, targets) = linear_dataset(200, 0.5, 20);
        let config = small_assembly(1);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let (state, _) = assemble_ensemble(&config, &inputs, &targets, &mut rng).unwrap();
            serde_json::to_string(&state).unwrap()
        };
        assert_eq!(run(), run());
    }
}
