use alloc::string::String;

/// Errors raised by the core pipeline stages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// A required channel is absent, duplicated, or the channel sets disagree.
    #[error("schema error: {0}")]
    Schema(String),
    /// A cell could not be parsed as a number.
    #[error("parse error at row {row}, channel {channel}: {message}")]
    Parse {
        row: usize,
        channel: String,
        message: String,
    },
    /// Nothing left to work with after cleaning or filtering.
    #[error("empty data: {0}")]
    EmptyData(String),
    /// Input contains NaN or infinite values where finite data is required.
    #[error("data error: {0}")]
    Data(String),
    /// Array dimensions disagree.
    #[error("shape error: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    /// A configuration value violates its documented range.
    #[error("config error: {0}")]
    Config(String),
    /// Covariance factorization failed even after ridge regularization.
    #[error("covariance is singular after regularization (lambda = {lambda:e})")]
    Singular { lambda: f64 },
    /// Training produced a NaN or infinite loss.
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    /// Threshold selection or ROC analysis needs both classes present.
    #[error("labeling error: {0}")]
    Labeling(String),
    /// A metric is undefined for the given counts.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    /// Two artifacts that must describe the same windows disagree.
    #[error("consistency error: {0}")]
    Consistency(String),
}

pub type CoreResult<T> = Result<T, CoreError>;

impl CoreError {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        CoreError::Shape {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
