use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by estimation, tuning, simulation and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("node index {index} out of range for p = {p}")]
    NodeOutOfRange { index: usize, p: usize },

    #[error("asymmetric adjacency at ({0}, {1})")]
    AsymmetricAdjacency(usize, usize),

    #[error("adjacency entry at ({row}, {col}) is {value}, expected 0 or 1")]
    NonBinaryAdjacency { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("factor scores are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("column {0} has zero standard deviation")]
    ConstantColumn(usize),

    #[error("loading cross-product is singular at step {0}")]
    SingularLoadings(usize),

    #[error("empty tuning grid")]
    EmptyGrid,

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable identifier used in the CLI's diagnostic prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SelfLoop(_) => "self_loop",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::AsymmetricAdjacency(..) => "asymmetric_adjacency",
            Error::NonBinaryAdjacency { .. } => "non_binary_adjacency",
            Error::Dimension(_) => "dimension",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonFinite { .. } => "non_finite",
            Error::NotOrthonormal(_) => "not_orthonormal",
            Error::ConstantColumn(_) => "constant_column",
            Error::SingularLoadings(_) => "singular_loadings",
            Error::EmptyGrid => "empty_grid",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
