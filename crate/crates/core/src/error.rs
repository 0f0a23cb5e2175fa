use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Register names or dimensions do not fit the state they are applied to.
    #[error("layout error: {0}")]
    Layout(String),

    /// An input failed a structural check (stochasticity, orthonormality, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// An iterative or dense numeric routine did not reach its tolerance.
    #[error("numeric error: {message} (residual {residual:.3e})")]
    Numeric { message: String, residual: f64 },

    /// A requested simulation would exceed its memory or state budget.
    #[error("size error: {0}")]
    Size(String),

    /// A parameter is outside its documented domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The search geometry is undefined for the requested marking.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A randomized estimator produced no usable estimate.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// Malformed text input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
