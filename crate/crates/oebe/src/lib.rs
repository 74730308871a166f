//! Online ensembles of basis expansions.
//!
//! A streaming Bayesian regression/classification engine built from linear
//! basis expansions with exact conjugate updates. Experts (linear, additive
//! polynomial, RBF network, random Fourier features, additive Hilbert-space
//! GP) are combined by Bayesian model averaging; optional random walks on the
//! expert weights (drift) and on the averaging weights (switching) make the
//! ensemble robust to changing data. Hyperparameters are fitted once by
//! empirical Bayes on a pretraining window and frozen.
//!
//! See the `examples/` directory for runnable demonstrations of each
//! capability, and the `oebe` binary for the experiment runner.

// Validation guards use `!(x > 0.0)` so that NaN is rejected along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bayes_linear;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod hyperopt;
pub mod kernels;

pub use error::{Error, Result};
