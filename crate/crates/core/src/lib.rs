//! Gaussian-process metamodels for expensive computer codes.
//!
//! The model is a one-degree polynomial trend plus a stationary Gaussian
//! process with a generalized exponential correlation and an optional
//! nugget:
//!
//! ```text
//! Y(x) = F(x) beta + Z(x) + U(x)
//! Cov(Y(x), Y(u)) = sigma^2 (prod_l exp(-theta_l |x_l - u_l|^p_l) + tau delta(x - u))
//! ```
//!
//! Hyperparameters are estimated by minimizing the profile objective
//! `det(R + tau I)^(1/n) * sigma2_hat` with a bounded pattern search. Inputs
//! enter the covariance one at a time (warm-started), the regression trend is
//! chosen by AICC and the covariance set by cross-validated Q2; see
//! [`selection`] for the full pipeline.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! features. The `parallel` feature evaluates cross-validation folds and
//! benchmark replicates on a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::many_single_char_names, clippy::needless_range_loop)]

extern crate alloc;

pub mod benchmark;
pub mod covariance;
pub mod data;
pub mod error;
pub mod estimation;
pub mod linalg;
mod math;
pub mod pattern_search;
pub mod predictor;
pub mod regression;
pub mod selection;
pub mod validation;

pub use covariance::{ActiveSet, CorrelationParams};
pub use data::{InputRanking, InputTransform, TrainingSet, UniformTransform};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use predictor::{GpModel, Kriging, PredictionResult};
pub use selection::{fit_full, FinalValidation, PipelineConfig, SelectionTrace};
