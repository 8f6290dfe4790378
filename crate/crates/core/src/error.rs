use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Data problem tied to a location in an input file (1-based data rows).
    #[error("{path}: row {row}, column '{column}': {message}")]
    DataAt {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("both treatment arms are required (treated = {treated}, control = {control})")]
    Positivity { treated: usize, control: usize },

    #[error("treatment arm {arm} has {count} observations; at least {required} are needed")]
    ArmTooSmall {
        arm: u8,
        count: usize,
        required: usize,
    },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("fit does not contain serialized forests; refit with `keep_forests = true`")]
    MissingForests,

    #[error("unsupported draws file version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("malformed draws file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the contents of user data rather than by the run itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_)
                | Error::DataAt { .. }
                | Error::Positivity { .. }
                | Error::ArmTooSmall { .. }
                | Error::DimensionMismatch { .. }
                | Error::Csv(_)
                | Error::Format(_)
                | Error::VersionMismatch { .. }
        )
    }
}
