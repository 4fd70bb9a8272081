use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("index ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training set contains a single class ({0} samples, all labeled {1})")]
    SingleClass(usize, u8),

    #[error("rank-deficient calibration design: {0}")]
    RankDeficient(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("timing provider: {0}")]
    Provider(String),

    #[error("graph must be undirected: {0}")]
    Directed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors that indicate a broken internal invariant rather than
    /// bad user input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::InvalidCsr(_))
    }
}
