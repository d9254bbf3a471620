use nts_core::nts::NtsError;
use nts_core::RdError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error(transparent)]
    Rd(#[from] RdError),
    #[error("session failed: {0}")]
    Session(NtsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::Invalid { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    /// Process exit status: 2 configuration, 3 solver, 4 synchronization,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Parse(_) | LabError::Invalid { .. } => 2,
            LabError::NonConvergence(_) => 3,
            LabError::Session(NtsError::SyncFailure { .. } | NtsError::StreamCorruption { .. }) => 4,
            LabError::Session(NtsError::Config { .. }) => 2,
            LabError::Rd(RdError::BelowAchievable { .. } | RdError::BadTarget(_)) => 2,
            LabError::Rd(_) | LabError::Session(_) | LabError::Io { .. } => 1,
        }
    }
}

impl From<NtsError> for LabError {
    fn from(e: NtsError) -> Self {
        match e {
            NtsError::Config { field, reason } => LabError::invalid(field, reason),
            other => LabError::Session(other),
        }
    }
}
