//! Feature maps `phi: R^D -> R^F` for the expert families: plain linear,
//! additive polynomial, one-layer RBF network, random Fourier features, and
//! additive Hilbert-space GP bases.
//!
//! A `BasisModel` is immutable after construction; `featurize` is a pure
//! function of the frozen parameters, so models can be shared across threads.
//! All randomness (feature frequencies, K-means seeding) comes from an
//! explicit seeded RNG passed to the builder.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{spectral_density_1d, KernelFamily, KernelSpec};

const KMEANS_ITERS: usize = 25;

/// One dimension of an additive Hilbert-space basis: domain half-width and
/// the per-feature amplitudes `sqrt(S(j pi / 2L))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsgpDim {
    pub half_width: f64,
    pub amplitudes: Vec<f64>,
}

/// Approximation domain `[-L_d, L_d]` per dimension for the Hilbert-space
/// basis, with the feature count per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsgpDomain {
    pub half_widths: Vec<f64>,
    pub scale_factor: f64,
    pub features_per_dim: Vec<usize>,
}

impl HsgpDomain {
    /// Builds the domain from pretraining inputs: `L_d = c * max |x_d|`,
    /// requiring `c > 1` so sinusoids do not pin to zero at the data boundary.
    pub fn from_data(
        points: &DMatrix<f64>,
        scale_factor: f64,
        features_per_dim: Vec<usize>,
    ) -> Result<Self> {
        if !(scale_factor > 1.0) {
            return Err(Error::InvalidParameter {
                name: "scale_factor",
                reason: format!("must exceed 1, got {scale_factor}"),
            });
        }
        if features_per_dim.len() != points.nrows() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                got: features_per_dim.len(),
            });
        }
        let half_widths = (0..points.nrows())
            .map(|d| {
                let max_abs = points.row(d).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                scale_factor * max_abs.max(1e-6)
            })
            .collect();
        Ok(Self {
            half_widths,
            scale_factor,
            features_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }
}

/// A frozen feature map. Construction fixes every parameter; evaluation is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisModel {
    Linear {
        dim: usize,
        intercept: bool,
    },
    PolynomialAdditive {
        dim: usize,
        degree: usize,
    },
    RbfNetwork {
        /// `D x K` matrix of center locations.
        centers: DMatrix<f64>,
        lengthscales: Vec<f64>,
    },
    Rff {
        /// `D x (F/2)` matrix of sampled frequency vectors.
        frequencies: DMatrix<f64>,
        process_scale: f64,
    },
    HsgpAdditive {
        dims: Vec<HsgpDim>,
    },
}

/// Linear basis `phi(x) = x`, optionally with a leading intercept.
pub fn build_linear(dim: usize, intercept: bool) -> Result<BasisModel> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "must be at least 1".into(),
        });
    }
    Ok(BasisModel::Linear { dim, intercept })
}

/// Additive polynomial basis: a shared intercept followed by
/// `(x_d, x_d^2, ..., x_d^p)` for each dimension; `F = D*p + 1`.
pub fn build_polynomial_additive(dim: usize, degree: usize) -> Result<BasisModel> {
    if dim == 0 || degree == 0 {
        return Err(Error::InvalidParameter {
            name: "degree",
            reason: "dim and degree must be at least 1".into(),
        });
    }
    Ok(BasisModel::PolynomialAdditive { dim, degree })
}

/// One-layer Gaussian RBF network with centers placed by K-means over the
/// pretraining inputs and per-dimension (ARD) length scales:
/// `phi_k(x) = exp(-0.5 * sum_d (x_d - mu_kd)^2 / l_d^2)`.
pub fn build_rbf_network<R: Rng>(
    pretrain: &DMatrix<f64>,
    n_centers: usize,
    lengthscales: Vec<f64>,
    rng: &mut R,
) -> Result<BasisModel> {
    if pretrain.ncols() < n_centers {
        return Err(Error::InvalidParameter {
            name: "n_centers",
            reason: format!(
                "{} pretraining points cannot seed {n_centers} centers",
                pretrain.ncols()
            ),
        });
    }
    if lengthscales.len() != pretrain.nrows() {
        return Err(Error::DimensionMismatch {
            expected: pretrain.nrows(),
            got: lengthscales.len(),
        });
    }
    let centers = kmeans(pretrain, n_centers, rng);
    Ok(BasisModel::RbfNetwork {
        centers,
        lengthscales,
    })
}

/// Samples standardized frequency draws for a random Fourier basis, one
/// column per frequency pair. The squared exponential draws standard normals.
/// The Matern-3/2 spectral density is a multivariate Student-t with 3 degrees
/// of freedom, sampled as `z * sqrt(3/u)` with one chi-squared(3) mixing
/// variable shared by the whole frequency vector; independent per-dimension
/// t draws would instead give a separable product kernel and fail the
/// Monte Carlo kernel-reconstruction oracle in more than one dimension.
/// Scaling by the length scales happens in [`build_rff_from_base`].
pub fn sample_rff_base<R: Rng>(
    family: KernelFamily,
    dim: usize,
    pairs: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    match family {
        KernelFamily::SeArd => DMatrix::from_fn(dim, pairs, |_, _| normal.sample(rng)),
        KernelFamily::Matern32Ard => {
            let chi2 = ChiSquared::<f64>::new(3.0).unwrap();
            let mut base = DMatrix::zeros(dim, pairs);
            for m in 0..pairs {
                let scale = (3.0 / chi2.sample(rng)).sqrt();
                for d in 0..dim {
                    base[(d, m)] = scale * normal.sample(rng);
                }
            }
            base
        }
    }
}

/// Builds a random Fourier basis from pre-sampled standardized draws. Row `d`
/// is scaled by `1/l_d`, which matches the kernel's spectral density in each
/// dimension (verified against the Fourier-transform oracle). Features come
/// in `[sin, cos]` pairs scaled by `sigma_f * sqrt(2/F)`, so
/// `|phi(x)| = sigma_f` exactly for every input.
pub fn build_rff_from_base(spec: &KernelSpec, base: &DMatrix<f64>) -> Result<BasisModel> {
    if base.nrows() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: base.nrows(),
        });
    }
    let mut frequencies = base.clone();
    for d in 0..spec.dim() {
        let inv_l = 1.0 / spec.lengthscales[d];
        for m in 0..frequencies.ncols() {
            frequencies[(d, m)] *= inv_l;
        }
    }
    Ok(BasisModel::Rff {
        frequencies,
        process_scale: spec.process_scale,
    })
}

/// Random Fourier feature basis with `F` features (`F/2` frequency pairs)
/// sampled from the normalized spectral density of `spec`.
pub fn build_rff<R: Rng>(spec: &KernelSpec, features: usize, rng: &mut R) -> Result<BasisModel> {
    if features == 0 || !features.is_multiple_of(2) {
        return Err(Error::InvalidParameter {
            name: "features",
            reason: format!("feature count must be even and positive, got {features}"),
        });
    }
    let base = sample_rff_base(spec.family, spec.dim(), features / 2, rng);
    build_rff_from_base(spec, &base)
}

/// Additive Hilbert-space GP basis. For dimension `d` and `j = 1..F_d`,
/// `phi_dj(x) = sqrt(S_d(j pi / 2L_d)) * sin(j pi (x_d + L_d) / 2L_d) / sqrt(L_d)`
/// where `S_d` is the 1-D spectral density of the kernel restricted to
/// dimension `d`. With a unit-variance weight prior the implied kernel is
/// `sum_j S(w_j) phi_j phi_j'`, which is why the amplitude carries the square
/// root of the density.
pub fn build_hsgp_additive(spec: &KernelSpec, domain: &HsgpDomain) -> Result<BasisModel> {
    if domain.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: domain.dim(),
        });
    }
    let mut dims = Vec::with_capacity(spec.dim());
    for d in 0..spec.dim() {
        let half_width = domain.half_widths[d];
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "half_widths",
                reason: format!("half width for dimension {d} must be positive"),
            });
        }
        let n_feat = domain.features_per_dim[d];
        let amplitudes = (1..=n_feat)
            .map(|j| {
                let omega = j as f64 * std::f64::consts::PI / (2.0 * half_width);
                spectral_density_1d(spec, d, omega).map(|s| s.sqrt())
            })
            .collect::<Result<Vec<_>>>()?;
        dims.push(HsgpDim {
            half_width,
            amplitudes,
        });
    }
    Ok(BasisModel::HsgpAdditive { dims })
}

impl BasisModel {
    /// Input dimension `D`.
    pub fn input_dim(&self) -> usize {
        match self {
            BasisModel::Linear { dim, .. } => *dim,
            BasisModel::PolynomialAdditive { dim, .. } => *dim,
            BasisModel::RbfNetwork { centers, .. } => centers.nrows(),
            BasisModel::Rff { frequencies, .. } => frequencies.nrows(),
            BasisModel::HsgpAdditive { dims } => dims.len(),
        }
    }

    /// Output dimension `F`.
    pub fn feature_dim(&self) -> usize {
        match self {
            BasisModel::Linear { dim, intercept } => dim + usize::from(*intercept),
            BasisModel::PolynomialAdditive { dim, degree } => dim * degree + 1,
            BasisModel::RbfNetwork { centers, .. } => centers.ncols(),
            BasisModel::Rff { frequencies, .. } => 2 * frequencies.ncols(),
            BasisModel::HsgpAdditive { dims } => dims.iter().map(|d| d.amplitudes.len()).sum(),
        }
    }

    /// True when an input falls outside the Hilbert-space approximation
    /// domain in any dimension. Always false for the other basis kinds.
    pub fn out_of_domain(&self, x: &[f64]) -> bool {
        match self {
            BasisModel::HsgpAdditive { dims } => {
                dims.iter().zip(x).any(|(dim, &v)| v.abs() > dim.half_width)
            }
            _ => false,
        }
    }

    /// Evaluates the feature map. Deterministic in the frozen parameters.
    pub fn featurize(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut out = Vec::with_capacity(self.feature_dim());
        match self {
            BasisModel::Linear { intercept, .. } => {
                if *intercept {
                    out.push(1.0);
                }
                out.extend_from_slice(x);
            }
            BasisModel::PolynomialAdditive { degree, .. } => {
                out.push(1.0);
                for &v in x {
                    let mut p = 1.0;
                    for _ in 0..*degree {
                        p *= v;
                        out.push(p);
                    }
                }
            }
            BasisModel::RbfNetwork {
                centers,
                lengthscales,
            } => {
                for k in 0..centers.ncols() {
                    let mut r2 = 0.0;
                    for d in 0..centers.nrows() {
                        let z = (x[d] - centers[(d, k)]) / lengthscales[d];
                        r2 += z * z;
                    }
                    out.push((-0.5 * r2).exp());
                }
            }
            BasisModel::Rff {
                frequencies,
                process_scale,
            } => {
                let amp = process_scale * (2.0 / self.feature_dim() as f64).sqrt();
                for m in 0..frequencies.ncols() {
                    let mut proj = 0.0;
                    for d in 0..frequencies.nrows() {
                        proj += x[d] * frequencies[(d, m)];
                    }
                    let (s, c) = proj.sin_cos();
                    out.push(amp * s);
                    out.push(amp * c);
                }
            }
            BasisModel::HsgpAdditive { dims } => {
                for (d, dim) in dims.iter().enumerate() {
                    let l = dim.half_width;
                    let scale = 1.0 / l.sqrt();
                    let arg0 = std::f64::consts::PI * (x[d] + l) / (2.0 * l);
                    for (j, amp) in dim.amplitudes.iter().enumerate() {
                        let phase = (j + 1) as f64 * arg0;
                        out.push(amp * phase.sin() * scale);
                    }
                }
            }
        }
        Ok(DVector::from_vec(out))
    }
}

/// Lloyd's K-means with a fixed iteration budget. Centers are seeded from
/// distinct random data points; a cluster that empties is re-seeded from a
/// random data point.
pub(crate) fn kmeans<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = points.ncols();
    let d = points.nrows();
    let seeds = rand::seq::index::sample(rng, n, k);
    let mut centers = DMatrix::zeros(d, k);
    for (c, i) in seeds.iter().enumerate() {
        centers.set_column(c, &points.column(i));
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        for (i, slot) in assignment.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let dist2 = (points.column(i) - centers.column(c)).norm_squared();
                if dist2 < best.0 {
                    best = (dist2, c);
                }
            }
            *slot = best.1;
        }
        let mut sums = DMatrix::zeros(d, k);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            let mut col = sums.column_mut(c);
            col += points.column(i);
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                let i = rng.random_range(0..n);
                centers.set_column(c, &points.column(i));
            } else {
                centers.set_column(c, &(sums.column(c) / count as f64));
            }
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_eval;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn se_spec(dim: usize, l: f64) -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::SeArd, dim, l, 1.0).unwrap()
    }

    #[test]
    fn linear_basis_matches_definition() {
        let with = build_linear(2, true).unwrap();
        assert_eq!(
            with.featurize(&[3.0, 4.0]).unwrap().as_slice(),
            &[1.0, 3.0, 4.0]
        );
        assert_eq!(with.feature_dim(), 3);

        let without = build_linear(1, false).unwrap();
        assert_eq!(without.featurize(&[0.0]).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn polynomial_basis_matches_definition() {
        let b = build_polynomial_additive(1, 2).unwrap();
        assert_eq!(b.featurize(&[3.0]).unwrap().as_slice(), &[1.0, 3.0, 9.0]);

        let b2 = build_polynomial_additive(2, 2).unwrap();
        assert_eq!(b2.feature_dim(), 5);
        let at_zero = b2.featurize(&[0.0, 0.0]).unwrap();
        assert_eq!(at_zero[0], 1.0);
        assert!(at_zero.as_slice()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rbf_feature_is_one_at_its_center_and_vanishes_far_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = DMatrix::from_fn(2, 40, |_, _| rng.random_range(-1.0..1.0));
        let b = build_rbf_network(&pts, 5, vec![0.7, 1.3], &mut rng).unwrap();
        let centers = match &b {
            BasisModel::RbfNetwork { centers, .. } => centers.clone(),
            _ => unreachable!(),
        };
        for k in 0..5 {
            let phi = b.featurize(centers.column(k).as_slice()).unwrap();
            assert_relative_eq!(phi[k], 1.0, max_relative = 1e-12);
        }
        let far = b.featurize(&[1e4, -1e4]).unwrap();
        assert!(far.amax() < 1e-300);
    }

    #[test]
    fn kmeans_centers_stay_inside_data_bounding_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = DMatrix::from_fn(3, 200, |_, _| rng.random_range(-2.0..5.0));
        let b = build_rbf_network(&pts, 12, vec![1.0; 3], &mut rng).unwrap();
        if let BasisModel::RbfNetwork { centers, .. } = &b {
            for k in 0..centers.ncols() {
                for d in 0..3 {
                    let (lo, hi) = pts
                        .row(d)
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                            (lo.min(v), hi.max(v))
                        });
                    assert!(centers[(d, k)] >= lo && centers[(d, k)] <= hi);
                }
            }
        }
    }

    #[test]
    fn rff_norm_equals_process_scale_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = KernelSpec::new(KernelFamily::SeArd, vec![0.5, 2.0], 1.7).unwrap();
        let b = build_rff(&spec, 64, &mut rng).unwrap();
        for _ in 0..20 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let phi = b.featurize(&x).unwrap();
            assert_relative_eq!(phi.norm(), 1.7, max_relative = 1e-12);
        }
    }

    #[test]
    fn rff_requires_even_feature_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = se_spec(1, 1.0);
        assert!(build_rff(&spec, 99, &mut rng).is_err());
    }

    #[test]
    fn rff_inner_product_converges_to_kernel() {
        // Monte Carlo oracle: with 1e5 frequency pairs the sample mean of
        // cos(tau . w) must sit within 3 standard errors of kappa(x, x').
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs = 100_000;
        for spec in [
            KernelSpec::new(KernelFamily::SeArd, vec![1.0, 0.6], 1.0).unwrap(),
            KernelSpec::new(KernelFamily::Matern32Ard, vec![0.8, 1.5], 1.0).unwrap(),
        ] {
            let base = sample_rff_base(spec.family, 2, pairs, &mut rng);
            let b = build_rff_from_base(&spec, &base).unwrap();
            let freq = match &b {
                BasisModel::Rff { frequencies, .. } => frequencies.clone(),
                _ => unreachable!(),
            };
            let (x, y) = ([0.3, -0.4], [-0.5, 0.6]);
            let tau = [x[0] - y[0], x[1] - y[1]];
            let terms: Vec<f64> = (0..pairs)
                .map(|m| (tau[0] * freq[(0, m)] + tau[1] * freq[(1, m)]).cos())
                .collect();
            let mean = terms.iter().sum::<f64>() / pairs as f64;
            let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (pairs - 1) as f64;
            let se = (var / pairs as f64).sqrt();
            let target = kernel_eval(&spec, &x, &y).unwrap();
            assert!(
                (mean - target).abs() < 3.0 * se,
                "family {:?}: {mean:.5} vs {target:.5} (se {se:.2e})",
                spec.family
            );
            // phi(x)' phi(y) is the same average, so it must agree too.
            let ip = b.featurize(&x).unwrap().dot(&b.featurize(&y).unwrap());
            assert_relative_eq!(ip, mean, max_relative = 1e-10);
        }
    }

    #[test]
    fn hsgp_features_vanish_at_negative_domain_edge() {
        let spec = se_spec(2, 1.0);
        let domain = HsgpDomain {
            half_widths: vec![4.0, 6.0],
            scale_factor: 1.5,
            features_per_dim: vec![5, 5],
        };
        let b = build_hsgp_additive(&spec, &domain).unwrap();
        let phi = b.featurize(&[-4.0, 0.3]).unwrap();
        for j in 0..5 {
            assert!(
                phi[j].abs() < 1e-12,
                "dimension-0 feature {j} nonzero at -L"
            );
        }
    }

    fn gram_rmse(basis: &BasisModel, spec: &KernelSpec, grid: &[f64]) -> (f64, f64) {
        let mut sq = 0.0;
        let mut max_abs = 0.0f64;
        let phis: Vec<_> = grid
            .iter()
            .map(|&x| basis.featurize(&[x]).unwrap())
            .collect();
        for (i, &xi) in grid.iter().enumerate() {
            for (j, &xj) in grid.iter().enumerate() {
                let approx = phis[i].dot(&phis[j]);
                let exact = kernel_eval(spec, &[xi], &[xj]).unwrap();
                let err = approx - exact;
                sq += err * err;
                max_abs = max_abs.max(err.abs());
            }
        }
        ((sq / (grid.len() * grid.len()) as f64).sqrt(), max_abs)
    }

    #[test]
    fn hsgp_gram_error_shrinks_with_feature_count() {
        let spec = se_spec(1, 1.0);
        let domain_for = |f: usize| HsgpDomain {
            half_widths: vec![4.5],
            scale_factor: 1.5,
            features_per_dim: vec![f],
        };
        let grid: Vec<f64> = (0..60).map(|i| -3.0 + 6.0 * i as f64 / 59.0).collect();
        let rmses: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&f| {
                gram_rmse(
                    &build_hsgp_additive(&spec, &domain_for(f)).unwrap(),
                    &spec,
                    &grid,
                )
                .0
            })
            .collect();
        let mut blips = 0;
        for w in rmses.windows(2) {
            if w[1] > w[0] {
                blips += 1;
            }
        }
        assert!(blips == 0, "rmse sequence not non-increasing: {rmses:?}");
        assert!(
            rmses[3] < rmses[0] / 4.0,
            "final {} vs initial {}",
            rmses[3],
            rmses[0]
        );
    }

    #[test]
    fn hsgp_beats_rff_at_equal_feature_count() {
        let spec = se_spec(1, 1.0);
        let l = 4.5;
        let domain = HsgpDomain {
            half_widths: vec![l],
            scale_factor: 1.5,
            features_per_dim: vec![64],
        };
        let hsgp = build_hsgp_additive(&spec, &domain).unwrap();
        let grid: Vec<f64> = (0..50)
            .map(|i| -0.8 * l + 1.6 * l * i as f64 / 49.0)
            .collect();
        let (_, hsgp_max) = gram_rmse(&hsgp, &spec, &grid);

        let mut rff_max_sum = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let rff = build_rff(&spec, 64, &mut rng).unwrap();
            rff_max_sum += gram_rmse(&rff, &spec, &grid).1;
        }
        let rff_max_avg = rff_max_sum / 20.0;
        assert!(
            hsgp_max < rff_max_avg,
            "hsgp max err {hsgp_max:.4} vs rff avg max err {rff_max_avg:.4}"
        );
    }

    #[test]
    fn featurize_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = se_spec(3, 1.2);
        let b = build_rff(&spec, 32, &mut rng).unwrap();
        let x = [0.1, -0.7, 2.4];
        assert_eq!(b.featurize(&x).unwrap(), b.featurize(&x).unwrap());
    }

    #[test]
    fn out_of_domain_flags_only_hsgp_points_beyond_half_width() {
        let spec = se_spec(1, 1.0);
        let domain = HsgpDomain {
            half_widths: vec![2.0],
            scale_factor: 1.5,
            features_per_dim: vec![4],
        };
        let hsgp = build_hsgp_additive(&spec, &domain).unwrap();
        assert!(!hsgp.out_of_domain(&[1.9]));
        assert!(hsgp.out_of_domain(&[2.1]));
        assert!(hsgp.featurize(&[2.1]).is_ok());
        let lin = build_linear(1, true).unwrap();
        assert!(!lin.out_of_domain(&[1e9]));
    }

    fn any_basis() -> impl Strategy<Value = BasisModel> {
        let seed = any::<u64>();
        (0u8..5, seed).prop_map(|(kind, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match kind {
                0 => build_linear(3, true).unwrap(),
                1 => build_polynomial_additive(3, 3).unwrap(),
                2 => {
                    let pts = DMatrix::from_fn(3, 30, |_, _| rng.random_range(-2.0..2.0));
                    build_rbf_network(&pts, 6, vec![1.0, 0.5, 2.0], &mut rng).unwrap()
                }
                3 => build_rff(&se_spec(3, 1.0), 16, &mut rng).unwrap(),
                _ => {
                    let domain = HsgpDomain {
                        half_widths: vec![5.0, 5.0, 5.0],
                        scale_factor: 1.5,
                        features_per_dim: vec![4, 4, 4],
                    };
                    build_hsgp_additive(&se_spec(3, 1.0), &domain).unwrap()
                }
            }
        })
    }

    proptest! {
        #[test]
        fn featurize_length_and_finiteness(basis in any_basis(),
                                           x in prop::array::uniform3(-50.0f64..50.0)) {
            let phi = basis.featurize(&x).unwrap();
            prop_assert_eq!(phi.len(), basis.feature_dim());
            prop_assert!(phi.iter().all(|v| v.is_finite()));
        }
    }
}
