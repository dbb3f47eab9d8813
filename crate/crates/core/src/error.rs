use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// The variants fall into the three classes the command line maps onto exit
/// codes: usage problems, malformed input data, and samples that cannot be
/// measured (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("sample error: {0}")]
    Sample(String),

    #[error("unknown language code '{0}'")]
    UnknownCode(String),

    #[error("'{0}' is neither a glottocode nor an ISO 639-3 code")]
    CodeShape(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate agreement: chance agreement is 1, kappa is undefined")]
    DegenerateAgreement,

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn sample(msg: impl Into<String>) -> Self {
        Error::Sample(msg.into())
    }

    /// Process exit code: 1 usage, 2 data, 3 sample.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. }
            | Error::Data(_)
            | Error::CodeShape(_)
            | Error::DimensionMismatch(_)
            | Error::DegenerateAgreement => 2,
            Error::Sample(_) | Error::UnknownCode(_) => 3,
        }
    }
}

pub(crate) fn csv_error(path: &std::path::Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => match line {
            Some(line) => Error::data(format!("{}:{line}: {kind:?}", path.display())),
            None => Error::data(format!("{}: {kind:?}", path.display())),
        },
    }
}
