use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    Geometry(String),

    #[error("invalid user profile: {0}")]
    Profile(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("subarray {index} has every switch off and carries no stream")]
    DeadSubarray { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectrum: relative eigenvalue gap {gap:e} <= {threshold:e}; use the Monte-Carlo path")]
    DegenerateSpectrum { gap: f64, threshold: f64 },

    #[error("ill-conditioned evaluation: {0}; use the Monte-Carlo path")]
    IllConditioned(String),

    #[error("exhaustive search space of ~{size:e} combinations exceeds the limit of {limit:e}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for the numerical guards (as opposed to bad input).
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. } | Error::DegenerateSpectrum { .. }
                | Error::IllConditioned(_)
                | Error::SearchSpaceTooLarge { .. }
        )
    }
}
