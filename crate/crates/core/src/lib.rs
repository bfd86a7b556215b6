//! Shrinkage estimators for the leading eigenvector of a one-factor covariance
//! model in the high-dimension, low-sample-size regime.
//!
//! Returns follow `R = βXᵀ + Z`. The PCA eigenvector `h` of `RRᵀ/n` is a
//! biased estimate of `b = β/‖β‖` when `p ≫ n`. MAPS shrinks `h` toward a
//! subspace of anchor vectors by a data-driven amount. GPS is the special case
//! whose only anchor is `q = e/√p`.
//!
//! ```
//! use maps_core::{anchors, eigen, estimators, model};
//!
//! let beta = model::generate_betas(300, 1.0, 0.5, 1).unwrap();
//! let params = model::GenerationParams {
//!     p: 300, n: 12, sigma2: 0.16, delta2: 0.25, beta_mean: 1.0, beta_sd: 0.5, seed: 2,
//! };
//! let (returns, truth) = model::generate_block(&params, &beta).unwrap();
//! let fe = eigen::leading_factor(&returns).unwrap();
//!
//! let partition = anchors::beta_ordered_partition(&beta, 6).unwrap();
//! let shrunk = estimators::maps(&fe, &anchors::partition_subspace(&partition)).unwrap();
//! assert!((&shrunk.h_hat - &truth.b).norm() < (&fe.h - &truth.b).norm());
//! ```

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod eigen;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod model;
pub mod portfolio;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/eigen.md")]
    mod eigen {}
    #[doc = include_str!("../../../book/src/anchors.md")]
    mod anchors {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/portfolio.md")]
    mod portfolio {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
