use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model `{model}` produced a non-finite value at parameters {params}")]
    NonFinite { model: String, params: String },

    #[error("normal equations are singular even after damping (lambda = {lambda:.3e})")]
    Singular { lambda: f64 },

    #[error("need more data points than parameters (points = {points}, parameters = {params})")]
    InsufficientData { points: usize, params: usize },

    #[error(
        "integration did not converge: estimate {estimate:.6e}, error {error:.3e} > tolerance {tolerance:.3e} after {intervals} intervals"
    )]
    Integration {
        estimate: f64,
        error: f64,
        tolerance: f64,
        intervals: usize,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }
}
