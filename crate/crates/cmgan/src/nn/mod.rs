//! Dense-network numerical core: parameter storage, forward/backward passes,
//! losses, SGD, and a finite-difference gradient checker.
//!
//! All arithmetic is in `f64`. Parameters live in a [`ParamStore`] and layers
//! reference them by [`ParamId`]; two layers holding the same id share the
//! identical underlying storage, which is how the weight-sharing constraint
//! is realized.

mod dense;
mod gradcheck;
mod loss;
mod optimizer;
mod store;

pub use dense::{dense_backward, dense_forward, Activation, DenseCache, DenseLayer, Mode};
pub use gradcheck::{gradient_check, gradient_check_ids, GradCheckReport};
pub use loss::{log_one_minus_score, log_score, mse, mse_grad, sigmoid_score, softmax_xent, softmax_rows};
pub use optimizer::{sgd_step, SgdState};
pub use store::{BatchNormState, DenseGrads, DenseParams, GradStore, ParamId, ParamStore};

pub type Tensor2 = ndarray::Array2<f64>;

/// Epsilon added to batch variance before the square root.
pub const BN_EPS: f64 = 1e-5;
/// Momentum of the exponential running statistics used at inference time.
pub const BN_MOMENTUM: f64 = 0.9;
/// Sigmoid scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before any logarithm.
pub const SCORE_EPS: f64 = 1e-7;
