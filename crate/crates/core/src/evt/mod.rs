//! Extreme-value lower bounds on how closely proximate factors track the
//! latent factors.
//!
//! The m-th largest |loading| governs the quality of an m-sparse factor. Its
//! limit law, after GEV norming, gives a probability that the generalized
//! correlation exceeds a threshold ρ₀; [`bounds`] evaluates those curves and
//! inverts them, [`order_stats`] supplies the order-statistic laws, and
//! [`dependence`] the error-dependence statistic h(m) and the extremal index.

pub mod bounds;
pub mod dependence;
pub mod gev;
pub mod order_stats;
pub mod overlap;

pub use bounds::{
    choose_m_theory, prop1_lower_bound, solve_tau_for_rho0, BoundModel, BoundParams, BoundResult, MTheory,
    MultiFactorBound, OneFactorBound, TheoryTarget,
};
pub use dependence::{extremal_index_blocks, h_of_m, toeplitz_correlation, HMethod, HProfile, HValue};
pub use gev::{gev_cdf, gev_starred, norming_constants, u_quantile, Family, GevSpec, Norming};
pub use order_stats::{g1m_dependent, g1m_independent, ClusterSizeDist};
pub use overlap::{
    cross_signal_matrix, gamma_of_c, min_singular_value, rotate_threshold_bound, sample_constrained_order_stats,
    sigma_min_b_bootstrap,
};
