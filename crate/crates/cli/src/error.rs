use l0break_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}\nhint: raise --big-m, or use --solver dp, which does not need a big-M bound")]
    BigM(CoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Core(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Csv(_) => 2,
            CliError::Config(_) => 3,
            CliError::BigM(_) => 4,
            CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BigMTooSmall { .. } => CliError::BigM(e),
            CoreError::InvalidConfig(m) | CoreError::Infeasible(m) => CliError::Config(m),
            CoreError::NonFinite { .. } | CoreError::InvalidData(_) | CoreError::DimensionMismatch { .. } => {
                CliError::Csv(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}
