use num_complex::Complex64;

/// Errors produced by the spectral toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("need at least {required} samples to resolve modes up to {max_mode}, got {provided}")]
    InsufficientResolution {
        required: usize,
        provided: usize,
        max_mode: i64,
    },
    #[error("non-finite input at position {index}")]
    NonFiniteInput { index: usize },
    #[error("sample arrays differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("index {index} does not belong to the {lattice} lattice")]
    ParityMismatch { index: i64, lattice: &'static str },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Schur iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(
        "shift {lambda} is numerically in the spectrum (condition estimate {condition:.3e}); nearest eigenvalue {nearest}"
    )]
    IllConditioned {
        lambda: Complex64,
        condition: f64,
        nearest: Complex64,
    },
    #[error("eigenvalue {eigenvalue} lies within {distance:.3e} of the contour centered at {center} (radius {radius})")]
    EigenvalueOnContour {
        eigenvalue: Complex64,
        distance: f64,
        center: Complex64,
        radius: f64,
    },
    #[error("projection is not idempotent to tolerance (residual {residual:.3e}); increase the node count above {nodes}")]
    QuadratureQuality { residual: f64, nodes: usize },
    #[error("no threshold within truncation: |n| <= {limit} still violates the resolvent bound")]
    NoThreshold { limit: i64 },
    #[error("unsupported order s = {0}; only s = 0 and s = 1 are evaluated")]
    UnsupportedOrder(usize),
}

pub type Result<T, E = SpectralError> = std::result::Result<T, E>;
