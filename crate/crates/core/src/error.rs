use thiserror::Error;

/// Errors raised by the channel analysis routines.
///
/// Numerical failures carry the measured defect so callers can tell a
/// tolerance misconfiguration from a genuinely invalid input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("principal root is ambiguous: eigenphase {phase} lies on the branch cut at -pi")]
    BranchAmbiguity { phase: f64 },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("peripheral cluster at {eigenvalue} is not semisimple (biorthogonality defect {defect:e})")]
    DefectiveCluster { eigenvalue: num_complex::Complex64, defect: f64 },

    #[error("no eigenvalue at 1: the map is not a valid channel")]
    NoFixedCluster,

    #[error("peripheral projector does not commute with the channel (defect {defect:e})")]
    CommutationDefect { defect: f64 },

    #[error("operator lies outside the attractor subspace (residual {residual:e})")]
    OutsideAttractor { residual: f64 },

    #[error("channel is not faithful (support dimension {support} < {dim})")]
    NotFaithful { support: usize, dim: usize },

    #[error("{stage}: defect {defect:e} exceeds tolerance")]
    Stage { stage: &'static str, defect: f64 },

    #[error("algebra factorization failed: {0}")]
    Factorization(String),

    #[error("invalid unfold spec: {0}")]
    InvalidSpec(String),

    #[error("unknown zoo channel '{0}'")]
    UnknownChannel(String),

    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    #[error("permutation is not the identity")]
    NontrivialPermutation,

    #[error("second channel is not an {n}-th root of the first (defect {defect:e})")]
    NotARoot { n: usize, defect: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
