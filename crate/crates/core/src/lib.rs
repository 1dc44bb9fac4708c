//! Sparse single-index regression `y = f(x^T beta) + eps` with a known,
//! strictly increasing link `f`.
//!
//! Estimation minimizes the l1-penalized least-squares loss by proximal
//! gradient descent with Barzilai-Borwein stepsizes and a nonmonotone line
//! search ([`solver::fit`]). Inference on a single coordinate uses a
//! decorrelated score test and a one-step Wald estimator
//! ([`inference::score_test`], [`inference::wald_estimate`]) whose
//! decorrelation direction solves a Dantzig-selector linear program
//! ([`dantzig::solve_dantzig`]).
//!
//! All numerical routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`. Coordinates are 0-based.

pub mod dantzig;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod normal;
pub mod scalar;
pub mod simulate;
pub mod solver;

pub use dantzig::{solve_dantzig, DantzigResult, DantzigStatus};
pub use error::{Error, Result};
pub use inference::{score_test, wald_estimate, InferenceConfig, ScoreTestResult, WaldResult};
pub use loss::{loss_gradient, loss_hessian, loss_value, penalized_objective};
pub use model::{builtin_link, Dataset, FitConfig, LinkFunction, SparsityGroundTruth};
pub use scalar::Scalar;
pub use solver::{fit, kkt_residual, FitResult};

pub type Link = LinkFunction<f64>;
pub type Data = Dataset<f64>;
pub type Config = FitConfig<f64>;
pub type Fit = FitResult<f64>;
pub type Dantzig = DantzigResult<f64>;
pub type Inference = InferenceConfig<f64>;
pub type ScoreTest = ScoreTestResult<f64>;
pub type Wald = WaldResult<f64>;
