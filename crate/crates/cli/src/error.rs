use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] capnet::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 usage, 2 parse/shape, 3 verification, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use capnet::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::CapExceeded(_) => 1,
                E::Shape(_) | E::NonFinite { .. } | E::Parse(_) | E::DegenerateLayer { .. } => 2,
                E::Numerical(_) | E::Contract(_) => 4,
            },
            CliError::Io { .. } | CliError::Csv(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
