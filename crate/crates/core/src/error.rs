use crate::grid::GridShape;

pub type Result<T> = std::result::Result<T, PdsError>;

#[derive(Debug, thiserror::Error)]
pub enum PdsError {
    #[error("invalid grid shape {channels}x{height}x{width}: all dimensions must be positive")]
    InvalidShape {
        channels: usize,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: GridShape, found: GridShape },

    #[error("data length {found} does not match shape {shape} ({expected} entries)")]
    LengthMismatch {
        shape: GridShape,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("near-zero divisor {value:e} at index {index}; the filter is not invertible")]
    NearZeroDivisor { index: usize, value: f64 },

    #[error("vector length {found} does not match operator dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not orthogonal: ||B^T B - I||_F = {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample list is empty")]
    EmptySamples,

    #[error("need at least {needed} samples, got {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("negative sample entry {value} at sample {sample}, index {index}")]
    NegativeSample {
        sample: usize,
        index: usize,
        value: f64,
    },

    #[error("filter {which} has non-positive entry {value} at index {index}")]
    NonPositiveFilter {
        which: &'static str,
        index: usize,
        value: f64,
    },

    #[error("covariance is not symmetric positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("sampler diverged at iteration {iteration}: sup-norm {sup_norm:e}")]
    Diverged { iteration: usize, sup_norm: f64 },

    #[error("non-finite score{}", .iteration.map(|t| format!(" at iteration {t}")).unwrap_or_default())]
    NonFiniteScore { iteration: Option<usize> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid file format: {0}")]
    Format(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
