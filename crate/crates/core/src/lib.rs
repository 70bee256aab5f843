//! Sparse "proximate" factors for large panels.
//!
//! The crate estimates a K-factor model by principal components, replaces each
//! dense loading vector by a hard-thresholded weight vector with only `m`
//! nonzero entries, and regresses the panel on those weights to obtain factors
//! that are built from a handful of cross-section units. Alongside the
//! estimator it provides:
//!
//! * closeness measures between factor or loading spaces ([`metrics`]),
//! * extreme-value lower bounds for how well the sparse factors track the
//!   latent ones ([`evt`]),
//! * an ℓ₁-penalized sparse PCA baseline ([`spca`]),
//! * a deterministic Monte Carlo data generator ([`simulate`]).
//!
//! Everything here is `no_std` with `alloc`; file formats, parallel
//! experiment drivers and the command line live in the `proximate` crate.

#![no_std]
// `!(x > 0.0)` is deliberate: it also rejects NaN. Index loops mirror the
// textbook recurrences.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod prelude {
    pub(crate) use alloc::{format, string::String, vec, vec::Vec};
    // Float supplies sqrt/exp/ln on f64 without std. Builds that pull std
    // in through dev-dependencies see it as redundant.
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

pub mod error;
pub mod evt;
pub mod factor;
pub mod fred;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod proximate;
pub mod rng;
pub mod simulate;
pub mod spca;
pub mod special;

pub use error::{Error, Result};
pub use factor::{common_component, pca_fit, FactorFit};
pub use metrics::{generalized_correlation, GenCorr};
pub use panel::{Panel, StandardizeMode};
pub use proximate::{hard_threshold_weights, proximate_factors, proximate_loadings, SparseWeights};

pub use nalgebra::DMatrix;
