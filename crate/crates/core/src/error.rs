use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("history length {got} does not match level {level} (expected {expected})")]
    LengthMismatch {
        level: usize,
        expected: usize,
        got: usize,
    },

    #[error("no quasi-graded submesh found: {0}")]
    NoSubmesh(String),

    #[error("barrier stack exceeds mesh: p_N = {p_n} > M = {m}")]
    StackExceedsMesh { p_n: usize, m: usize },

    #[error("non-positive diagonal weight {value:e} at level {level}")]
    NonPositiveDiagonal { level: usize, value: f64 },

    #[error("linear solver did not converge at level {level}: relative residual {residual:e} after {iterations} iterations")]
    SolverDivergence {
        level: usize,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("meshes do not nest: {0}")]
    NonNesting(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Experiment {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Innermost error, skipping experiment context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Experiment { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
