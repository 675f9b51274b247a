//! Crate-wide error type.

use crate::navier_stokes::StepDiagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid too small: {nx}x{ny} cells (the 5-point stencil needs at least 3x3)")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "Newton iteration did not converge: residual {residual:.3e} after {} iterations",
        diagnostics.iterations
    )]
    NonConvergence {
        residual: f64,
        diagnostics: StepDiagnostics,
    },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("boundary node at ({x:.6}, {y:.6}) has kernel support leaving the fluid grid")]
    NodeOutsideDomain { x: f64, y: f64 },

    #[error("body does not fit inside the fluid domain with the required kernel margin")]
    BodyTooLargeForDomain,

    #[error("stored KKT factorization is stale: the fluid state changed since it was computed")]
    StaleFactorization,

    #[error("reference velocity is zero; force coefficients are undefined")]
    ZeroReferenceVelocity,

    #[error("no lift oscillation detected: {0}")]
    NoOscillationDetected(String),

    #[error(
        "incompatible boundary conditions: net prescribed boundary flux {flux:.3e} \
         (a closed domain requires zero net inflow)"
    )]
    IncompatibleBoundaryFlux { flux: f64 },

    #[error("line search failed to reduce the objective; returning best iterate")]
    LineSearchFailure,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a rollout step index to a solver error.
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::StepFailed {
            step,
            source: Box::new(self),
        }
    }
}
