//! Empirical-Bayes pretraining in isolation: multi-start evidence
//! optimization for a random-feature basis, then Laplace sampling of
//! hyperparameter sets around the best mode.
//!
//! Run with: cargo run --release --example empirical_bayes

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use oebe::hyperopt::{
    fit_multi_start, sample_hyperparams, BasisFamily, FamilyContext, OptimizerBudget,
};
use oebe::kernels::KernelFamily;

fn main() {
    // Ground truth: a smooth 1-D function with known noise.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 500;
    let noise_std = 0.3;
    let inputs = DMatrix::from_fn(1, n, |_, _| 3.0 * normal.sample(&mut rng));
    let targets = DVector::from_fn(n, |j, _| {
        let x: f64 = inputs[(0, j)];
        x.sin() + 0.5 * (0.5 * x).cos() + noise_std * normal.sample(&mut rng)
    });

    let ctx = FamilyContext::build(
        BasisFamily::Rff {
            kernel: KernelFamily::SeArd,
            features: 50,
            optimize_frequencies: false,
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
            steps: 250,
            step_size: 1e-2,
        },
    )
    .unwrap();

    println!(
        "multi-start results (best first), true noise variance {:.3}:\n",
        noise_std * noise_std
    );
    println!(
        "{:>4} {:>14} {:>12} {:>12} {:>12}",
        "mode", "log evidence", "prior var", "noise var", "length scale"
    );
    for (i, mode) in modes.iter().enumerate() {
        let p = mode.eta.constrain();
        println!(
            "{:>4} {:>14.2} {:>12.4} {:>12.4} {:>12.4}",
            i, mode.log_evidence, p[0], p[1], p[2]
        );
    }

    let best = &modes[0];
    let draws = sample_hyperparams(best, 9, &mut rng);
    println!("\nnine Laplace draws around the best mode (plus the mode itself -> ten experts):");
    for (i, eta) in draws.iter().enumerate() {
        let p = eta.constrain();
        println!(
            "  draw {:>2}: prior var {:.4}, noise var {:.4}, length scale {:.4}",
            i + 1,
            p[0],
            p[1],
            p[2]
        );
    }
}
