use thiserror::Error;

/// Errors raised by the analysis, dilation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("family member {index} is not normal (residual {residual:.3e})")]
    NotNormal { index: usize, residual: f64 },

    #[error("family members {first} and {second} do not commute (residual {residual:.3e})")]
    NotCommuting {
        first: usize,
        second: usize,
        residual: f64,
    },

    #[error(
        "could not resolve a common eigenbasis after {attempts} attempts (residual {residual:.3e})"
    )]
    DegeneracyUnresolved { attempts: usize, residual: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("operator is not an orthogonal projector (residual {residual:.3e})")]
    NotProjector { residual: f64 },

    #[error("invalid projector family: {0}")]
    InvalidFamily(String),

    #[error("projector {index} is not invariant (|L(P)| = {residual:.3e})")]
    NotInvariant { index: usize, residual: f64 },

    #[error("operator is not diagonal in the supplied basis (residual {residual:.3e})")]
    NotDiagonal { residual: f64 },

    #[error("not maximally dephasing: {0}")]
    NotMaximallyDephasing(String),

    #[error("Hamiltonian obstruction |Delta| = {max_delta:.6e} at {triple:?}")]
    Obstructed {
        max_delta: f64,
        triple: (usize, usize, usize),
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid classical model: {0}")]
    InvalidModel(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
