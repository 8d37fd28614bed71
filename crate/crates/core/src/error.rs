use std::path::PathBuf;

use num_complex::Complex64;

use crate::circuit::{NodeId, Violation};
use crate::jet::AnalyticGate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// Variants split into usage errors (bad arguments, mismatched shapes),
/// domain errors (an analytic gate evaluated at a singular point) and
/// persistence errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("{gate} is not analytic at {value}{}{}", fmt_node(*node), fmt_direction(*direction))]
    GateDomain {
        gate: AnalyticGate,
        value: Complex64,
        node: Option<NodeId>,
        direction: Option<usize>,
    },

    #[error("invalid circuit: {}", fmt_violations(.0))]
    InvalidCircuit(Vec<Violation>),

    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle refuses n={n}, s={s} (limits n <= {max_n}, s <= {max_s})")]
    OracleLimit {
        n: usize,
        s: usize,
        max_n: usize,
        max_s: usize,
    },

    #[error("n[r] overflowed for n={n}, r={r}; use log-domain arithmetic")]
    SymDimOverflow { n: usize, r: usize },

    #[error(transparent)]
    Persist(#[from] PersistError),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl Error {
    /// True for analytic-gate domain failures.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::GateDomain { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_node(self, id: NodeId) -> Self {
        match self {
            Error::GateDomain {
                gate,
                value,
                direction,
                ..
            } => Error::GateDomain {
                gate,
                value,
                node: Some(id),
                direction,
            },
            e => e,
        }
    }

    pub(crate) fn at_direction(self, i: usize) -> Self {
        match self {
            Error::GateDomain {
                gate, value, node, ..
            } => Error::GateDomain {
                gate,
                value,
                node,
                direction: Some(i),
            },
            e => e,
        }
    }
}

/// Failures reading or writing sketch files.
#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"TSKD\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown direction mode {0}")]
    BadMode(u8),
    #[error("truncated: need {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{0} trailing bytes after body")]
    TrailingBytes(u64),
    #[error("header dimensions invalid: {0}")]
    BadDims(String),
    #[error("non-finite value at byte offset {0}")]
    NonFinite(u64),
}

fn fmt_node(node: Option<NodeId>) -> String {
    node.map(|n| format!(" (node {n})")).unwrap_or_default()
}

fn fmt_direction(direction: Option<usize>) -> String {
    direction
        .map(|i| format!(" (direction {i})"))
        .unwrap_or_default()
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
