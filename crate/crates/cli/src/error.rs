use gbt_trust_core::data::DataError;
use gbt_trust_core::explain::ExplainError;
use gbt_trust_core::gbt::GbtError;
use gbt_trust_core::synthgen::SynthError;
use gbt_trust_core::tune::TuneError;
use thiserror::Error;

/// Exit codes: 1 replay mismatch, 2 I/O, 3 schema, 4 config.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("replay mismatch: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) => 1,
            CliError::Io(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let msg = e.to_string();
        match e {
            DataError::FileNotFound(_) | DataError::Io(_) => CliError::Io(msg),
            DataError::InvalidFraction(_)
            | DataError::DegenerateSplit { .. }
            | DataError::InvalidK(_)
            | DataError::KTooLarge { .. }
            | DataError::RowOutOfRange { .. } => CliError::Config(msg),
            _ => CliError::Schema(msg),
        }
    }
}

impl From<GbtError> for CliError {
    fn from(e: GbtError) -> Self {
        match e {
            GbtError::Data(d) => d.into(),
            GbtError::ConfigOutOfRange(_) => CliError::Config(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::Data(d) => d.into(),
            TuneError::Gbt(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Data(d) => d.into(),
            ExplainError::Gbt(g) => g.into(),
            ExplainError::DimensionMismatch { .. } => CliError::Schema(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// A generator spec that fails validation is reported as an input error.
impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Data(d) => d.into(),
            _ => CliError::Io(e.to_string()),
        }
    }
}
