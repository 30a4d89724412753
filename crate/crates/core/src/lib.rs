//! Estimation and inference for low-dimensional parameter components of
//! linear models fit on adaptively collected data.
//!
//! The crate is organised around five pieces:
//!
//! - [`linalg`] / [`model`]: dataset types and the least-squares and
//!   projection kernels every estimator shares.
//! - [`generators`]: seeded simulators for `(k, d)`-adaptive designs
//!   (i.i.d. baseline, greedy treatment assignment, k-coordinate greedy).
//! - [`estimators`]: OLS, centered OLS, the TALE two-stage estimating
//!   equation, self-normalized concentration intervals and W-decorrelation.
//! - [`metrics`]: scaled-MSE, coverage/width aggregation and normality
//!   diagnostics for standardized errors.
//! - [`harness`]: experiment configuration, the deterministic parallel
//!   replication driver and CSV persistence.

pub mod error;
pub mod estimators;
pub mod generators;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod stats;

pub use error::{Error, Result};
pub use model::{AdaptiveDataset, EstimateReport, GenerationMeta, Method, ModelSpec};
