use thiserror::Error;

/// Errors produced by the library.
///
/// `Scenario` and `Usage` indicate bad input (CLI exit code 1); the
/// remaining variants indicate numerical or state failures (exit code 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid density profile: {0}")]
    Construction(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("invalid particle state: {0}")]
    State(String),

    #[error("integration failed at t = {time} (step {step}): {detail}")]
    Integration {
        time: f64,
        step: usize,
        detail: String,
    },

    #[error("grid step rejected: {0}")]
    Step(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Scenario(_) | Error::Usage(_) | Error::Parse(_) | Error::Construction(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
