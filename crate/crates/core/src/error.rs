use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Total utilization of a server reached or exceeded one.
    #[error("saturated server {server}: utilization {utilization:.4} >= 1")]
    Unstable { server: String, utilization: f64 },

    #[error("fixed point did not converge for {class} after {iterations} iterations")]
    NonConvergence { class: String, iterations: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
