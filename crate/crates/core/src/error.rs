use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the simulator can report.
///
/// Variants map onto the error kinds the command-line driver turns into exit
/// codes, so keep them coarse.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("wavelength {wavelength_um} um outside transparency window [{min_um}, {max_um}] um")]
    Domain {
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("no phase-matching solution: {0}")]
    NoSolution(String),

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("empty matched band: {0}")]
    Band(String),

    #[error("not present: {0}")]
    NotPresent(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
