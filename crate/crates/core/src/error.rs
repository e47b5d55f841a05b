use thiserror::Error;

use crate::metric::WeightMatrix;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate landmark Gram")]
    DegenerateGram,

    #[error("non-representative model: within-class energy {0:e} is too small")]
    NonRepresentativeModel(f64),

    #[error("no representative kernel")]
    NoRepresentativeKernel,

    #[error("mean collapse for class {class}, kernel {kernel}")]
    MeanCollapse { class: usize, kernel: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("singular linear system")]
    Singular,

    #[error("kernel mismatch: basis kernels {0} and {1} differ")]
    KernelMismatch(usize, usize),

    #[error("missing basis for class {class}, kernel {kernel}")]
    MissingBasis { class: usize, kernel: usize },

    #[error("non-finite objective during optimization")]
    NonFiniteObjective { last_feasible: Box<WeightMatrix> },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
