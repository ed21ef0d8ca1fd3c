use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `row` and `col` are 1-based, with row 1 the header.
    #[error("format error at row {row}, column {col}: {msg}")]
    Format { row: usize, col: usize, msg: String },

    /// Input parsed but violates a data invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Caller broke a documented precondition (shapes, index sets, kinds).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {required} {what}, got {actual}")]
    InsufficientData {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    /// A matrix could not be factorized even at the largest allowed jitter.
    #[error(
        "matrix not positive definite at max jitter {max_jitter:.3e} \
         (pivot {pivot} = {pivot_value:.3e}, condition estimate {condition_estimate:.3e})"
    )]
    NotPositiveDefinite {
        max_jitter: f64,
        pivot: usize,
        pivot_value: f64,
        condition_estimate: f64,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// Every restart of a variational fit failed.
    #[error("fit failed in all {} restarts: {}", .0.len(), .0.join("; "))]
    FitFailed(Vec<String>),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NonFinite(_) | Error::FitFailed(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
