use std::path::PathBuf;

use thiserror::Error;

use crate::topology::QubitId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("invalid hardware graph: {0}")]
    InvalidGraph(String),

    #[error("unknown qubit {0}")]
    UnknownQubit(QubitId),

    #[error("unknown topology kind `{0}`")]
    UnknownTopology(String),

    #[error("partition needs at least {needed} qubits, got {got}")]
    PartitionTooSmall { needed: usize, got: usize },

    #[error("partition is not connected on the coupling map")]
    Disconnected,

    #[error("non-positive CRI denominator {0} for this calibration")]
    DegenerateCalibration(f64),

    #[error("graph has no edge weight (m = 0)")]
    EmptyGraph,

    #[error(transparent)]
    Qasm(#[from] crate::circuits::QasmError),

    #[error("no connected subset of size {size} inside the community")]
    NoConnectedSubset { size: usize },

    #[error("mapping size mismatch: program has {logical} qubits, partition has {physical}")]
    SizeMismatch { logical: usize, physical: usize },

    #[error("invalid crosstalk model: {0}")]
    InvalidCrosstalk(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
