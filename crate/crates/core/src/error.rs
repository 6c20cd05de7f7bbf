use thiserror::Error;

/// Errors raised while validating or transforming problem data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("adjacency matrix has nonzero diagonal entry at {0}")]
    NonzeroDiagonal(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("instance too large for exhaustive enumeration: size {size} exceeds cap {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
}

/// Parse failures carry the 1-based line number of the offending record.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unexpected end of input: {0}")]
    Eof(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    /// The interior-point iteration stopped before reaching the requested gap.
    /// `dual_bound` is still a valid upper bound on the relaxation.
    #[error("interior point did not converge after {iterations} iterations (dual bound {dual_bound})")]
    NotConverged { iterations: usize, dual_bound: f64 },
    #[error("invalid SDP input: {0}")]
    Input(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("no free variable left to branch on")]
    NoFreeVariable,
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unexpected message {got} in state {state}")]
    Unexpected { got: String, state: String },
    #[error("endpoint {0} disconnected")]
    Disconnected(usize),
}
