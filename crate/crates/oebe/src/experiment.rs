//! The experiment runner: a validated configuration format, the pretrain +
//! stream loop with metric output and checkpoint/resume, and a comparison
//! table over finished runs.
//!
//! A run is deterministic in its configuration and seed: data generation,
//! hyperparameter fitting, and the online pass all draw from one seeded RNG,
//! and the stream loop itself uses no randomness. Resuming from a checkpoint
//! therefore reproduces the uninterrupted run byte for byte.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::build_linear;
use crate::bayes_linear::Likelihood;
use crate::data::{
    gen_drift, gen_friedman, gen_interleaved_clusters, load_csv, population_variance, standardize,
    standardize_inputs, ClassificationTrace, DriftSchedule, FriedmanVariant, MetricTrace,
    StreamRecord, TargetColumn,
};
use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::hyperopt::{
    assemble_ensemble, to_matrix, AssemblyConfig, BasisFamily, FamilyDeclaration, FamilyFitReport,
    OptimizerBudget, SwitchingKind,
};
use crate::kernels::KernelFamily;

pub const SCHEMA_VERSION: u32 = 1;

/// Paper-protocol defaults baked into shipped configurations.
pub mod defaults {
    /// Random-walk variance of dynamic experts.
    pub const SIGMA_RW: f64 = 1e-3;
    /// Weights below this collapse to exactly zero.
    pub const WEIGHT_FLOOR: f64 = 1e-16;
    /// Length-scale multipliers for multi-start initialization.
    pub const S_GRID: [f64; 3] = [0.1, 1.0, 10.0];
    /// Random Fourier features (50 frequency pairs).
    pub const RFF_FEATURES: usize = 100;
    /// Hilbert-space feature budget, split as floor(100 / D) per dimension.
    pub const HSGP_TOTAL_FEATURES: usize = 100;
    /// RBF network centers.
    pub const RBF_CENTERS: usize = 100;
    /// Block-switching probability.
    pub const DELTA: f64 = 0.05;
    /// Initial weight prior variance for empirical Bayes.
    pub const PRIOR_VAR_INIT: f64 = 1.0;
    /// Initial noise variance for empirical Bayes.
    pub const NOISE_VAR_INIT: f64 = 0.25;
    /// Pretraining window length.
    pub const PRETRAIN_WINDOW: usize = 1000;
    /// Hilbert-space domain scale factor.
    pub const HSGP_DOMAIN_SCALE: f64 = 1.5;
    /// Experts per fitted mode (the mode plus nine Laplace draws).
    pub const SAMPLES_PER_MODE: usize = 10;
}

fn default_true() -> bool {
    true
}
fn default_s_grid() -> Vec<f64> {
    defaults::S_GRID.to_vec()
}
fn default_samples_per_mode() -> usize {
    defaults::SAMPLES_PER_MODE
}
fn default_pretrain() -> usize {
    defaults::PRETRAIN_WINDOW
}
fn default_delta() -> f64 {
    defaults::DELTA
}
fn default_weight_floor() -> f64 {
    defaults::WEIGHT_FLOOR
}
fn default_sigma_rw_levels() -> Vec<f64> {
    vec![defaults::SIGMA_RW]
}
fn default_prior_var() -> f64 {
    defaults::PRIOR_VAR_INIT
}
fn default_noise_var() -> f64 {
    defaults::NOISE_VAR_INIT
}
fn default_domain_scale() -> f64 {
    defaults::HSGP_DOMAIN_SCALE
}
fn default_optimizer() -> OptimizerBudget {
    OptimizerBudget::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    SeArd,
    Matern32Ard,
}

impl From<KernelChoice> for KernelFamily {
    fn from(value: KernelChoice) -> Self {
        match value {
            KernelChoice::SeArd => KernelFamily::SeArd,
            KernelChoice::Matern32Ard => KernelFamily::Matern32Ard,
        }
    }
}

/// Basis family declaration as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Linear {
        #[serde(default = "default_true")]
        intercept: bool,
    },
    Polynomial {
        degree: usize,
    },
    Rbf {
        centers: usize,
        #[serde(default = "default_true")]
        optimize_centers: bool,
    },
    Rff {
        kernel: KernelChoice,
        features: usize,
        #[serde(default)]
        optimize_frequencies: bool,
    },
    Hsgp {
        kernel: KernelChoice,
        total_features: usize,
        #[serde(default = "default_domain_scale")]
        domain_scale: f64,
    },
}

impl FamilyConfig {
    /// Resolves to the assembly-level family once the post-standardization
    /// input dimension is known.
    pub fn to_family(&self, dim: usize) -> BasisFamily {
        match self {
            FamilyConfig::Linear { intercept } => BasisFamily::Linear {
                intercept: *intercept,
            },
            FamilyConfig::Polynomial { degree } => {
                BasisFamily::PolynomialAdditive { degree: *degree }
            }
            FamilyConfig::Rbf {
                centers,
                optimize_centers,
            } => BasisFamily::RbfNetwork {
                n_centers: *centers,
                optimize_centers: *optimize_centers,
            },
            FamilyConfig::Rff {
                kernel,
                features,
                optimize_frequencies,
            } => BasisFamily::Rff {
                kernel: (*kernel).into(),
                features: *features,
                optimize_frequencies: *optimize_frequencies,
            },
            FamilyConfig::Hsgp {
                kernel,
                total_features,
                domain_scale,
            } => BasisFamily::HsgpAdditive {
                kernel: (*kernel).into(),
                features_per_dim: (*total_features / dim).max(1),
                domain_scale: *domain_scale,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    pub family: FamilyConfig,
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    #[serde(default = "default_samples_per_mode")]
    pub samples_per_mode: usize,
}

/// Drift schedule for generated streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant,
    RandomWalk {
        step_var: f64,
    },
    WalkAfter {
        onset: usize,
        step_var: f64,
    },
    /// Weights flip sign at `change_at`.
    AbruptFlip {
        change_at: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        target: TargetColumn,
        #[serde(default = "default_true")]
        has_header: bool,
    },
    Friedman {
        variant: u8,
        n: usize,
        #[serde(default)]
        noise_std: Option<f64>,
    },
    /// Linear-model stream with drifting weights drawn from the run seed.
    DriftLinear {
        dim: usize,
        n: usize,
        noise_std: f64,
        schedule: ScheduleConfig,
    },
    /// Interleaved two-cluster classification stream with labels in {-1, +1}.
    Clusters {
        n: usize,
        noise_std: f64,
        #[serde(default)]
        ordered: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    Oebe,
    Doebe,
    Sdoebe,
    Edoebe,
}

impl EnsembleMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "oebe" => Ok(EnsembleMode::Oebe),
            "doebe" => Ok(EnsembleMode::Doebe),
            "sdoebe" => Ok(EnsembleMode::Sdoebe),
            "edoebe" => Ok(EnsembleMode::Edoebe),
            other => Err(Error::Config(format!("unknown ensemble mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodChoice {
    #[default]
    Gaussian,
    Logistic,
}

/// Full experiment description. Unknown keys are rejected so configuration
/// typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataSource,
    #[serde(default = "default_pretrain")]
    pub pretrain: usize,
    pub families: Vec<FamilyEntry>,
    pub mode: EnsembleMode,
    #[serde(default = "default_sigma_rw_levels")]
    pub sigma_rw_levels: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_weight_floor")]
    pub weight_floor: f64,
    #[serde(default)]
    pub likelihood: LikelihoodChoice,
    #[serde(default = "default_prior_var")]
    pub prior_var_init: f64,
    #[serde(default = "default_noise_var")]
    pub noise_var_init: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerBudget,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Write a checkpoint after streaming this many records.
    #[serde(default)]
    pub checkpoint_at: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                expected: SCHEMA_VERSION,
                got: self.schema_version,
            });
        }
        if self.families.is_empty() {
            return Err(Error::Config("at least one basis family required".into()));
        }
        if self.pretrain == 0 {
            return Err(Error::Config("pretrain window must be positive".into()));
        }
        if self.sigma_rw_levels.is_empty() || self.sigma_rw_levels.iter().any(|&v| v < 0.0) {
            return Err(Error::Config(
                "sigma_rw_levels must be non-empty and non-negative".into(),
            ));
        }
        if matches!(self.mode, EnsembleMode::Edoebe) && self.sigma_rw_levels.len() < 2 {
            return Err(Error::Config(
                "edoebe needs at least two drift levels (e.g. [1e-3, 0.0])".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.weight_floor < 0.0 {
            return Err(Error::Config("weight_floor must be non-negative".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "run".into())
    }

    /// Hash of the experiment semantics: environmental fields (output paths,
    /// checkpoint trigger) are excluded so a resume in a different directory
    /// still matches.
    pub fn semantic_hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = None;
        canon.checkpoint_at = None;
        let json = serde_json::to_string(&canon).expect("config serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }

    fn assembly(&self, dim: usize) -> AssemblyConfig {
        let (drift_levels, switching) = match self.mode {
            EnsembleMode::Oebe => (vec![0.0], SwitchingKind::None),
            EnsembleMode::Doebe => (vec![self.sigma_rw_levels[0]], SwitchingKind::None),
            EnsembleMode::Sdoebe => (
                vec![self.sigma_rw_levels[0]],
                SwitchingKind::Uniform { delta: self.delta },
            ),
            EnsembleMode::Edoebe => (
                self.sigma_rw_levels.clone(),
                SwitchingKind::Blocks { delta: self.delta },
            ),
        };
        AssemblyConfig {
            families: self
                .families
                .iter()
                .map(|entry| FamilyDeclaration {
                    family: entry.family.to_family(dim),
                    s_grid: entry.s_grid.clone(),
                    samples_per_mode: entry.samples_per_mode,
                    budget: self.optimizer,
                })
                .collect(),
            prior_var_init: self.prior_var_init,
            noise_var_init: self.noise_var_init,
            drift_levels,
            switching,
            weight_floor: self.weight_floor,
            likelihood: match self.likelihood {
                LikelihoodChoice::Gaussian => Likelihood::Gaussian,
                LikelihoodChoice::Logistic => Likelihood::Logistic,
            },
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Materializes the configured data source into records.
pub fn materialize(source: &DataSource, seed: u64) -> Result<Vec<StreamRecord>> {
    match source {
        DataSource::Csv {
            path,
            target,
            has_header,
        } => load_csv(path, target, *has_header),
        DataSource::Friedman {
            variant,
            n,
            noise_std,
        } => {
            let (variant, default_noise) = match variant {
                1 => (FriedmanVariant::One, crate::data::FRIEDMAN1_NOISE_STD),
                2 => (FriedmanVariant::Two, crate::data::FRIEDMAN2_NOISE_STD),
                other => {
                    return Err(Error::Config(format!("unknown friedman variant {other}")));
                }
            };
            Ok(gen_friedman(
                variant,
                *n,
                noise_std.unwrap_or(default_noise),
                seed,
            ))
        }
        DataSource::DriftLinear {
            dim,
            n,
            noise_std,
            schedule,
        } => {
            let basis = build_linear(*dim, true)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let theta0 = DVector::from_fn(basis.feature_dim(), |_, _| {
                rand::Rng::random_range(&mut rng, -1.0..1.0)
            });
            let schedule = match schedule {
                ScheduleConfig::Constant => DriftSchedule::Constant,
                ScheduleConfig::RandomWalk { step_var } => DriftSchedule::RandomWalk {
                    step_var: *step_var,
                },
                ScheduleConfig::WalkAfter { onset, step_var } => DriftSchedule::WalkAfter {
                    onset: *onset,
                    step_var: *step_var,
                },
                ScheduleConfig::AbruptFlip { change_at } => DriftSchedule::AbruptSwitch {
                    change_at: *change_at,
                    theta_after: -&theta0,
                },
            };
            gen_drift(&basis, &theta0, &schedule, *noise_std, *n, seed)
        }
        DataSource::Clusters {
            n,
            noise_std,
            ordered,
        } => Ok(gen_interleaved_clusters(*n, *noise_std, *ordered, seed)),
    }
}

/// Final state of one run, written as the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_records: usize,
    pub n_streamed: usize,
    pub n_experts: usize,
    pub final_nmse: Option<f64>,
    pub final_pll: f64,
    pub final_error_rate: Option<f64>,
    pub out_of_domain: u64,
    pub family_fits: Vec<FamilyFitReport>,
}

/// Output locations of one finished run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    config_hash: String,
    next_index: usize,
    ensemble: EnsembleState,
    trace: Option<MetricTrace>,
    class_trace: Option<ClassificationTrace>,
    class_log_lik_sum: f64,
    out_of_domain: u64,
    metric_rows: Vec<String>,
    family_fits: Vec<FamilyFitReport>,
}

fn resolve_out_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("OEBE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs an experiment end to end: materialize, standardize, pretrain, stream,
/// and write the metrics CSV plus JSON summary.
pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let loop_state = prepare(config, None)?;
    stream_and_finish(config, loop_state)
}

/// Resumes a checkpointed run; the finished outputs are byte-identical to an
/// uninterrupted run of the same configuration and seed.
pub fn resume(config: &ExperimentConfig, checkpoint_path: &Path) -> Result<RunArtifacts> {
    config.validate()?;
    let text = std::fs::read_to_string(checkpoint_path)
        .map_err(|e| Error::Config(format!("{}: {e}", checkpoint_path.display())))?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)?;
    if checkpoint.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            expected: SCHEMA_VERSION,
            got: checkpoint.schema_version,
        });
    }
    if checkpoint.config_hash != config.semantic_hash() {
        return Err(Error::ConfigHashMismatch);
    }
    let loop_state = prepare(config, Some(checkpoint))?;
    stream_and_finish(config, loop_state)
}

struct LoopState {
    records: Vec<StreamRecord>,
    ensemble: EnsembleState,
    trace: Option<MetricTrace>,
    class_trace: Option<ClassificationTrace>,
    class_log_lik_sum: f64,
    out_of_domain: u64,
    metric_rows: Vec<String>,
    family_fits: Vec<FamilyFitReport>,
    next_index: usize,
}

fn prepare(config: &ExperimentConfig, checkpoint: Option<Checkpoint>) -> Result<LoopState> {
    let raw = materialize(&config.data, config.seed)?;
    if raw.is_empty() {
        return Err(Error::Config("data source produced no records".into()));
    }
    if raw.len() < config.pretrain {
        eprintln!(
            "warning: stream has {} records, shorter than the pretrain window {}; using the full stream",
            raw.len(),
            config.pretrain
        );
    }
    let classification = matches!(config.likelihood, LikelihoodChoice::Logistic);
    let (records, _standardizer) = if classification {
        standardize_inputs(&raw, config.pretrain)?
    } else {
        standardize(&raw, config.pretrain)?
    };

    if let Some(cp) = checkpoint {
        return Ok(LoopState {
            records,
            ensemble: cp.ensemble,
            trace: cp.trace,
            class_trace: cp.class_trace,
            class_log_lik_sum: cp.class_log_lik_sum,
            out_of_domain: cp.out_of_domain,
            metric_rows: cp.metric_rows,
            family_fits: cp.family_fits,
            next_index: cp.next_index,
        });
    }

    let window = config.pretrain.min(records.len());
    let (inputs, targets) = to_matrix(&records[..window]);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (ensemble, family_fits) = assemble_ensemble(
        &config.assembly(inputs.nrows()),
        &inputs,
        &targets,
        &mut rng,
    )?;

    let trace = if classification {
        None
    } else {
        let var = population_variance(records.iter().map(|r| r.y));
        Some(MetricTrace::new(var)?)
    };
    let class_trace = classification.then(ClassificationTrace::default);

    Ok(LoopState {
        records,
        ensemble,
        trace,
        class_trace,
        class_log_lik_sum: 0.0,
        out_of_domain: 0,
        metric_rows: Vec::new(),
        family_fits,
        next_index: window,
    })
}

fn stream_and_finish(config: &ExperimentConfig, mut state: LoopState) -> Result<RunArtifacts> {
    let out_dir = resolve_out_dir(config);
    std::fs::create_dir_all(&out_dir)?;
    let label = config.label();
    let metrics_path = out_dir.join(format!("{label}_metrics.csv"));
    let summary_path = out_dir.join(format!("{label}_summary.json"));
    let config_hash = config.semantic_hash();
    let classification = state.class_trace.is_some();

    if state.metric_rows.is_empty() {
        let mut header = String::from(if classification {
            "t,error_rate,pll,top_weight_index"
        } else {
            "t,nmse,pll,top_weight_index"
        });
        for m in 0..state.ensemble.n_experts() {
            header.push_str(&format!(",w{m}"));
        }
        state.metric_rows.push(header);
    }

    let checkpoint_trigger = config.checkpoint_at.map(|offset| {
        let window = config.pretrain.min(state.records.len());
        window + offset
    });

    let total = state.records.len();
    while state.next_index < total {
        let idx = state.next_index;
        let record = state.records[idx].clone();
        if let Some(trigger) = checkpoint_trigger {
            if idx == trigger {
                write_checkpoint(&out_dir, &label, &config_hash, &state)?;
            }
        }
        if state
            .ensemble
            .experts
            .iter()
            .any(|e| e.basis.out_of_domain(&record.x))
        {
            state.out_of_domain += 1;
        }
        let outcome =
            state
                .ensemble
                .step(&record.x, record.y, idx)
                .map_err(|e| Error::NumericalFailure {
                    step: idx,
                    reason: e.to_string(),
                })?;

        let (leading, pll) = if let Some(trace) = &mut state.trace {
            trace.update(
                outcome.prediction.mean,
                outcome.log_mixture_density,
                record.y,
            );
            (trace.nmse(), trace.pll())
        } else {
            let class_trace = state.class_trace.as_mut().unwrap();
            class_trace.update(outcome.prediction.mean, record.y);
            state.class_log_lik_sum += outcome.log_mixture_density;
            (
                class_trace.error_rate(),
                state.class_log_lik_sum / class_trace.count() as f64,
            )
        };

        let top = state
            .ensemble
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut row = format!("{},{:.10e},{:.10e},{}", record.t, leading, pll, top);
        for w in state.ensemble.weights.iter() {
            row.push_str(&format!(",{w:.6e}"));
        }
        state.metric_rows.push(row);
        state.next_index += 1;
    }

    std::fs::write(&metrics_path, state.metric_rows.join("\n") + "\n")?;

    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        label: label.clone(),
        config_hash,
        seed: config.seed,
        n_records: total,
        n_streamed: state
            .trace
            .as_ref()
            .map(|t| t.count())
            .unwrap_or_else(|| state.class_trace.as_ref().map(|t| t.count()).unwrap_or(0)),
        n_experts: state.ensemble.n_experts(),
        final_nmse: state.trace.as_ref().map(|t| t.nmse()),
        final_pll: state.trace.as_ref().map(|t| t.pll()).unwrap_or_else(|| {
            let n = state.class_trace.as_ref().map(|t| t.count()).unwrap_or(0);
            if n == 0 {
                0.0
            } else {
                state.class_log_lik_sum / n as f64
            }
        }),
        final_error_rate: state.class_trace.as_ref().map(|t| t.error_rate()),
        out_of_domain: state.out_of_domain,
        family_fits: state.family_fits.clone(),
    };
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(RunArtifacts {
        summary,
        metrics_path,
        summary_path,
    })
}

fn write_checkpoint(
    out_dir: &Path,
    label: &str,
    config_hash: &str,
    state: &LoopState,
) -> Result<()> {
    let checkpoint = Checkpoint {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash.to_string(),
        next_index: state.next_index,
        ensemble: state.ensemble.clone(),
        trace: state.trace.clone(),
        class_trace: state.class_trace.clone(),
        class_log_lik_sum: state.class_log_lik_sum,
        out_of_domain: state.out_of_domain,
        metric_rows: state.metric_rows.clone(),
        family_fits: state.family_fits.clone(),
    };
    let path = out_dir.join(format!("{label}_checkpoint.json"));
    std::fs::write(path, serde_json::to_string(&checkpoint)?)?;
    Ok(())
}

/// Renders an aligned comparison table over finished-run summaries. Best PLL
/// and best nMSE (or error rate) are marked with `*`; ties mark all.
pub fn compare(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::Config("no result files given".into()));
    }
    let mut summaries = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let summary: RunSummary = serde_json::from_str(&text)?;
        if summary.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                expected: SCHEMA_VERSION,
                got: summary.schema_version,
            });
        }
        summaries.push(summary);
    }

    let best_pll = summaries
        .iter()
        .map(|s| s.final_pll)
        .fold(f64::NEG_INFINITY, f64::max);
    let errors: Vec<f64> = summaries
        .iter()
        .map(|s| s.final_nmse.or(s.final_error_rate).unwrap_or(f64::NAN))
        .collect();
    let best_err = errors.iter().copied().fold(f64::INFINITY, f64::min);

    let mut table = String::new();
    table.push_str(&format!(
        "{:<24} {:>12} {:>12} {:>8}\n",
        "run", "nmse/err", "pll", "experts"
    ));
    for (s, &err) in summaries.iter().zip(&errors) {
        let err_mark = if err == best_err { "*" } else { " " };
        let pll_mark = if s.final_pll == best_pll { "*" } else { " " };
        table.push_str(&format!(
            "{: <24} {:>11.4}{} {:>11.4}{} {:>8}\n",
            s.label, err, err_mark, s.final_pll, pll_mark, s.n_experts
        ));
    }
    Ok(table)
}
