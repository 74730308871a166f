//! Stationary ARD kernels, their one-dimensional spectral densities, and an
//! exact Gaussian-process predictive used as a validation oracle.
//!
//! Spectral densities use the angular-frequency convention
//! `k(tau) = (1/2pi) * integral S(w) exp(i w tau) dw`, so for the squared
//! exponential in one dimension `S(w) = sigma_f^2 * l * sqrt(2pi) *
//! exp(-l^2 w^2 / 2)`. The same convention is used by the random-feature
//! sampler and the Hilbert-space basis weights.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative jitter added to Gram diagonals before factorization.
pub const GRAM_JITTER_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    SeArd,
    Matern32Ard,
}

/// A stationary ARD kernel: family, per-dimension length scales, and the
/// process scale `sigma_f` (the prior amplitude).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub process_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, process_scale: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidParameter {
                name: "lengthscales",
                reason: "at least one dimension required".into(),
            });
        }
        if lengthscales.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lengthscales",
                reason: format!("all length scales must be positive, got {lengthscales:?}"),
            });
        }
        if !(process_scale > 0.0) || !process_scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "process_scale",
                reason: format!("must be positive, got {process_scale}"),
            });
        }
        Ok(Self {
            family,
            lengthscales,
            process_scale,
        })
    }

    /// Isotropic kernel: the same length scale in every dimension.
    pub fn isotropic(
        family: KernelFamily,
        dim: usize,
        lengthscale: f64,
        process_scale: f64,
    ) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], process_scale)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// The 1-D marginal kernel for dimension `d` (same family and process
    /// scale, single length scale `l_d`).
    pub fn marginal_1d(&self, d: usize) -> Result<KernelSpec> {
        if d >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: d,
            });
        }
        KernelSpec::new(self.family, vec![self.lengthscales[d]], self.process_scale)
    }

    fn r2_ard(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((&a, &b), &l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }
}

/// Evaluates `k(x, x')` for an ARD kernel.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x.len(),
        });
    }
    if y.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: y.len(),
        });
    }
    let s2 = spec.process_scale * spec.process_scale;
    let r2 = spec.r2_ard(x, y);
    Ok(match spec.family {
        KernelFamily::SeArd => s2 * (-0.5 * r2).exp(),
        KernelFamily::Matern32Ard => {
            let sr = (3.0 * r2).sqrt();
            s2 * (1.0 + sr) * (-sr).exp()
        }
    })
}

/// Power spectral density of the 1-D marginal kernel of dimension `d`, in the
/// angular-frequency convention (see module docs).
pub fn spectral_density_1d(spec: &KernelSpec, d: usize, omega: f64) -> Result<f64> {
    if d >= spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: d,
        });
    }
    let l = spec.lengthscales[d];
    let s2 = spec.process_scale * spec.process_scale;
    Ok(match spec.family {
        KernelFamily::SeArd => {
            s2 * l * (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * l * l * omega * omega).exp()
        }
        // Fourier transform of (1 + sqrt(3)|tau|/l) exp(-sqrt(3)|tau|/l):
        // 12 sqrt(3) / l^3 * (3/l^2 + w^2)^(-2).
        KernelFamily::Matern32Ard => {
            let base = 3.0 / (l * l) + omega * omega;
            s2 * 12.0 * 3f64.sqrt() / (l * l * l) / (base * base)
        }
    })
}

/// Symmetric matrix of pairwise kernel evaluations over the columns of a
/// `D x N` input matrix.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    process_scale: f64,
}

impl GramMatrix {
    pub fn new(spec: &KernelSpec, points: &DMatrix<f64>) -> Result<Self> {
        if points.nrows() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: points.nrows(),
            });
        }
        let n = points.ncols();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel_eval(
                    spec,
                    points.column(i).as_slice(),
                    points.column(j).as_slice(),
                )?;
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(Self {
            entries,
            process_scale: spec.process_scale,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Cholesky factorization of `K + extra_diag*I` with the standard jitter
    /// `1e-10 * sigma_f^2` added to the diagonal first.
    pub fn cholesky(&self, extra_diag: f64) -> Result<Cholesky<f64, Dyn>> {
        let jitter = GRAM_JITTER_REL * self.process_scale * self.process_scale;
        let mut m = self.entries.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter + extra_diag;
        }
        m.cholesky().ok_or(Error::NotPositiveDefinite {
            context: "gram matrix",
        })
    }
}

/// Exact GP predictive (zero mean function) for the latent function values at
/// the test points: `mean = K*' (K + noise I)^-1 y`,
/// `cov = K** - K*' (K + noise I)^-1 K*`, factored by Cholesky.
///
/// Validation oracle only; cost is cubic in the number of training points.
pub fn exact_gp_predict(
    spec: &KernelSpec,
    x_train: &DMatrix<f64>,
    y: &DVector<f64>,
    x_test: &DMatrix<f64>,
    noise_var: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if y.len() != x_train.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_train.ncols(),
            got: y.len(),
        });
    }
    if !(noise_var > 0.0) {
        return Err(Error::InvalidParameter {
            name: "noise_var",
            reason: format!("must be positive, got {noise_var}"),
        });
    }
    if x_test.nrows() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x_test.nrows(),
        });
    }
    let gram = GramMatrix::new(spec, x_train)?;
    let chol = gram.cholesky(noise_var)?;

    let n = x_train.ncols();
    let m = x_test.ncols();
    let mut cross = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            cross[(i, j)] = kernel_eval(
                spec,
                x_train.column(i).as_slice(),
                x_test.column(j).as_slice(),
            )?;
        }
    }
    let test_gram = GramMatrix::new(spec, x_test)?;

    let alpha = chol.solve(y);
    let mean = cross.transpose() * alpha;
    let v = chol.solve(&cross);
    let mut cov = test_gram.entries() - cross.transpose() * v;
    symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Averages a matrix with its transpose in place.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
