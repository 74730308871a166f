//! End-to-end streaming regression: pretrain a mixed-basis ensemble by
//! empirical Bayes on the first chunk of a synthetic nonlinear stream, then
//! filter the rest online and report running nMSE / predictive log-likelihood.
//!
//! Run with: cargo run --release --example streaming_regression

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use oebe::bayes_linear::Likelihood;
use oebe::data::{gen_friedman, population_variance, standardize, FriedmanVariant, MetricTrace};
use oebe::ensemble::DEFAULT_WEIGHT_FLOOR;
use oebe::hyperopt::{
    assemble_ensemble, to_matrix, AssemblyConfig, BasisFamily, FamilyDeclaration, OptimizerBudget,
    SwitchingKind,
};
use oebe::kernels::KernelFamily;

fn main() {
    let raw = gen_friedman(FriedmanVariant::One, 6000, 1.0, 42);
    let window = 1000;
    let (records, _) = standardize(&raw, window).expect("standardize");
    let (inputs, targets) = to_matrix(&records[..window]);

    let budget = OptimizerBudget {
        steps: 150,
        step_size: 1e-2,
    };
    let config = AssemblyConfig {
        families: vec![
            FamilyDeclaration {
                family: BasisFamily::Linear { intercept: true },
                s_grid: vec![1.0],
                samples_per_mode: 1,
                budget,
            },
            FamilyDeclaration {
                family: BasisFamily::Rff {
                    kernel: KernelFamily::SeArd,
                    features: 60,
                    optimize_frequencies: false,
                },
                s_grid: vec![0.1, 1.0, 10.0],
                samples_per_mode: 3,
                budget,
            },
            FamilyDeclaration {
                family: BasisFamily::HsgpAdditive {
                    kernel: KernelFamily::SeArd,
                    features_per_dim: 10,
                    domain_scale: 1.5,
                },
                s_grid: vec![0.1, 1.0, 10.0],
                samples_per_mode: 3,
                budget,
            },
        ],
        prior_var_init: 1.0,
        noise_var_init: 0.25,
        drift_levels: vec![1e-3],
        switching: SwitchingKind::None,
        weight_floor: DEFAULT_WEIGHT_FLOOR,
        likelihood: Likelihood::Gaussian,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ensemble, reports) =
        assemble_ensemble(&config, &inputs, &targets, &mut rng).expect("assembly");
    println!("assembled {} experts:", ensemble.n_experts());
    for (decl, report) in config.families.iter().zip(&reports) {
        println!(
            "  {:<18} evidences {:?}",
            format!("{:?}", kind_name(&decl.family)),
            report
                .evidences
                .iter()
                .map(|e| (e * 10.0).round() / 10.0)
                .collect::<Vec<_>>()
        );
    }

    let var = population_variance(records.iter().map(|r| r.y));
    let mut trace = MetricTrace::new(var).expect("variance");
    for r in &records[window..] {
        let out = ensemble.step(&r.x, r.y, r.t).expect("step");
        trace.update(out.prediction.mean, out.log_mixture_density, r.y);
        if (r.t + 1) % 1000 == 0 {
            println!(
                "t = {:>5}  nMSE = {:.4}  PLL = {:+.4}  top weight = {:.3}",
                r.t + 1,
                trace.nmse(),
                trace.pll(),
                ensemble.weights.max()
            );
        }
    }
    println!(
        "final over {} streamed records: nMSE = {:.4}, PLL = {:+.4}",
        trace.count(),
        trace.nmse(),
        trace.pll()
    );
}

fn kind_name(family: &BasisFamily) -> &'static str {
    match family {
        BasisFamily::Linear { .. } => "linear",
        BasisFamily::PolynomialAdditive { .. } => "polynomial",
        BasisFamily::RbfNetwork { .. } => "rbf_network",
        BasisFamily::Rff { .. } => "random_fourier",
        BasisFamily::HsgpAdditive { .. } => "hilbert_space",
    }
}
