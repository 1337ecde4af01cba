use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} is out of range for a graph with {n} vertices")]
    UnknownVertex { vertex: usize, n: usize },

    #[error("edge {edge} is out of range ({m} edges)")]
    UnknownEdge { edge: usize, m: usize },

    #[error("duplicate edge {0}")]
    DuplicateEdge(String),

    #[error("weight {weight} of edge {edge} is outside [0, 1]")]
    InvalidWeight { edge: String, weight: f64 },

    #[error("sequence repeats vertex {0}")]
    RepeatedVertex(usize),

    #[error("vertex {vertex} already observed in state {existing}, cannot observe state {new}")]
    Inconsistent { vertex: usize, existing: u8, new: u8 },

    #[error("observations have zero probability under the prior")]
    ImpossibleEvidence,

    #[error("{what} = {got} exceeds the enumeration guard of {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Whether the error is an enumeration guard rather than bad input.
    pub fn is_guard(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub(crate) fn guard(what: &'static str, got: usize, limit: usize) -> Result<()> {
    if got > limit {
        Err(Error::Capacity { what, got, limit })
    } else {
        Ok(())
    }
}
