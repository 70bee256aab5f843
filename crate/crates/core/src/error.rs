use crate::prelude::*;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{context}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    DimensionMismatch {
        context: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("eigensolver did not converge at index {index} (off-diagonal residual {residual:e})")]
    EigenNoConvergence { index: usize, residual: f64 },

    #[error("eigenvalue {index} is not positive ({value:e}); reduce the number of factors")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("{context}: Gram matrix is singular (condition number {condition:e}); {hint}")]
    SingularGram {
        context: &'static str,
        condition: f64,
        hint: &'static str,
    },

    #[error("column {column} is identically zero")]
    ZeroColumn { column: usize },

    #[error("sparse loading column {column} was eliminated by penalty alpha = {alpha}")]
    SparseColumnEliminated { column: usize, alpha: f64 },

    #[error("non-finite value for unit {unit} at period {period}")]
    NonFinite { unit: String, period: String },

    #[error("unit {unit} has zero variance")]
    ZeroVariance { unit: String },

    #[error("duplicate {axis} id {id:?}")]
    DuplicateId { axis: &'static str, id: String },

    #[error("panel needs N >= 1 and T >= 2 (got N = {n}, T = {t})")]
    PanelTooSmall { n: usize, t: usize },

    #[error("too few eligible rows for rotate-and-threshold: {}", format_shortfall(.shortfall))]
    InsufficientEligibleRows { shortfall: Vec<(usize, usize)>, m: usize },

    #[error("overlap bound c = {c} is outside [0, {cap}) for this number of factors")]
    OverlapBoundTooLarge { c: f64, cap: f64 },

    #[error("target {target} is outside the attainable range ({lo}, {hi})")]
    Unattainable { target: f64, lo: f64, hi: f64 },

    #[error("no m up to {max_m} reaches probability {target_prob}; best bound {best_bound} at m = {best_m}")]
    BoundUnattainable {
        target_prob: f64,
        max_m: usize,
        best_bound: f64,
        best_m: usize,
    },

    #[error("exact enumeration needs {subsets:e} subsets (limit 1e6); request the greedy method")]
    EnumerationTooLarge { subsets: f64 },

    #[error("series has no exceedances of the threshold")]
    NoExceedances,

    #[error("unknown distribution family {0:?}")]
    UnknownFamily(String),

    #[error("unknown transform code {0} (expected 1..=7)")]
    UnknownTransform(i64),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("bootstrap drew {draws} degenerate resamples; giving up")]
    BootstrapDegenerate { draws: usize },
}

fn format_shortfall(shortfall: &[(usize, usize)]) -> String {
    let parts: Vec<String> = shortfall
        .iter()
        .map(|(col, have)| format!("column {col} has {have}"))
        .collect();
    parts.join(", ")
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input); the CLI
    /// maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::NonPositiveEigenvalue { .. }
                | Error::SingularGram { .. }
                | Error::SparseColumnEliminated { .. }
                | Error::Unattainable { .. }
                | Error::BoundUnattainable { .. }
                | Error::NotPositiveDefinite
                | Error::BootstrapDegenerate { .. }
                | Error::InsufficientEligibleRows { .. }
        )
    }
}

pub(crate) fn check_shape(
    context: &'static str,
    rows: usize,
    cols: usize,
    expected_rows: usize,
    expected_cols: usize,
) -> Result<()> {
    if rows == expected_rows && cols == expected_cols {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected_rows,
            expected_cols,
            rows,
            cols,
        })
    }
}
