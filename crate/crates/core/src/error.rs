//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("duplicate id '{0}'")]
    DuplicateDevice(String),

    #[error("invariant violation at {context}: {message}")]
    Invariant { context: String, message: String },

    #[error("unknown device '{id}', known ids: {}", known.join(", "))]
    UnknownDevice { id: String, known: Vec<String> },

    #[error("invalid challenge: {0}")]
    InvalidChallenge(String),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("signature shape mismatch: {a} vs {b}")]
    ShapeMismatch { a: String, b: String },

    #[error("need at least {need} sessions, got {got}")]
    TooFewSessions { got: usize, need: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate CRP record for {0} (pass overwrite to replace)")]
    DuplicateRecord(String),

    #[error("no CRP record for {0}")]
    MissingRecord(String),

    #[error("non-separable statistics: intra mean {intra} >= inter mean {inter}")]
    NonSeparable { intra: f64, inter: f64 },

    #[error("no embedding of the requested coupling map into '{host}'")]
    NoEmbedding { host: String },

    #[error("device '{target}' does not share the coupling-map shape of '{requested}'")]
    NotIsomorphic { requested: String, target: String },
}
