use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("network has no edges")]
    EmptyNetwork,

    /// Some flow never reaches the sink, so `I - M` is singular.
    #[error("non-dissipative network: {reason}; trapped component: [{}]", component.join(", "))]
    NonDissipative {
        reason: String,
        component: Vec<String>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate topology: {0}")]
    DegenerateTopology(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("walker exceeded {limit} hops without reaching the sink (last site {last_site})")]
    HopLimit { limit: u64, last_site: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Input-side failures (files, parsing, validation) as opposed to analysis failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::EmptyNetwork
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
