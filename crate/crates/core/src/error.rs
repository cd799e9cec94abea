use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not self-adjoint at ({row}, {col}): deviation {deviation:e}")]
    NotSelfAdjoint { row: usize, col: usize, deviation: f64 },

    #[error("not a density matrix: min eigenvalue {min_eigenvalue:e}, trace error {trace_error:e}")]
    NotDensity { min_eigenvalue: f64, trace_error: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("mean value is infeasible (slack {slack:e})")]
    Infeasible { slack: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("unknown builtin scenario `{0}`")]
    UnknownScenario(String),

    #[error("probe budget exceeded: {failed} of {total} samples failed")]
    ProbeBudget { failed: usize, total: usize },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Validation errors are problems with the input, as opposed to solver or
    /// infrastructure failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NotSelfAdjoint { .. }
            | Error::Schema { .. }
            | Error::UnknownScenario(_)
            | Error::InvalidConfig(_)
            | Error::EmptyInput(_)
            | Error::DimensionMismatch { .. } => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
