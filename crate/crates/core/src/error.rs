use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    /// CG met `p'Op p <= 0` on an operator that should be positive definite.
    #[error("operator not positive definite ({context}): lambda outside definiteness interval")]
    NotPositiveDefinite { context: String },

    #[error(
        "eigensolver did not converge after {iterations} iterations (worst residual {residual:e})"
    )]
    EigenNotConverged { iterations: usize, residual: f64 },

    #[error(
        "endpoint {endpoint} not numerically singular (smallest pencil eigenvalue {smallest:e})"
    )]
    EndpointNotSingular { endpoint: f64, smallest: f64 },

    #[error("endpoint eigenstructure inconsistent at {endpoint}: {reason}")]
    EndpointInconsistent { endpoint: f64, reason: String },

    /// Two evaluations of the secular function agree to rounding and neither is zero.
    #[error("secular function is constant on the bracket")]
    ConstantPhi,

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
