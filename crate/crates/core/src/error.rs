use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("vertex {vertex} is isolated (w_u = 0)")]
    IsolatedVertex { vertex: usize },
    #[error("chain is not reversible: max detailed-balance residual {residual:e}")]
    NonReversible { residual: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid vertex set: {0}")]
    InvalidSet(String),
    #[error("infinite resistance: {0}")]
    InfiniteResistance(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("dimension {dim} exceeds cap {cap}")]
    Size { dim: usize, cap: usize },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Instance(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
