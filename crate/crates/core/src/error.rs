use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("not a correlation matrix: {0}")]
    NotCorrelation(String),

    #[error("degenerate diagonal entry {value:e} at index {index}")]
    DegenerateDiagonal { index: usize, value: f64 },

    #[error("eigen solver did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("vector lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("vector has zero variance; Pearson correlation is undefined")]
    ZeroVariance,

    #[error("vector is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("geodesic distance is not finite (generalised eigenvalue {eigenvalue:e})")]
    NonFiniteResult { eigenvalue: f64 },

    #[error("response type does not match the distance measure")]
    ResponseMismatch,

    #[error("invalid dissimilarity matrix: {0}")]
    InvalidDissimilarity(String),

    #[error("invalid design matrix: {0}")]
    InvalidDesign(String),

    #[error("design matrix is rank deficient (condition number of X'X {condition:e})")]
    RankDeficientDesign { condition: f64 },

    #[error("residual trace {trace:e} is not positive; pseudo-F is undefined")]
    DegenerateResidual { trace: f64 },

    #[error("correlation parameter rho = {0} is outside (-1, 1)")]
    InvalidRho(f64),

    #[error("Wishart degrees of freedom {df} below dimension {dim}")]
    DegreesOfFreedomTooSmall { df: usize, dim: usize },

    #[error("invalid implant plan: {0}")]
    InvalidImplant(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cell (b={b}, m={m}, r={r}) replicate {replicate}: {source}")]
    Cell {
        b: usize,
        m: f64,
        r: f64,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_pair(self, i: usize, j: usize) -> Self {
        Error::Pair {
            i,
            j,
            source: Box::new(self),
        }
    }
}
