use thiserror::Error;

/// Errors raised anywhere in the curvature pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(
        "step size underflow at t = {t} (h = {h:e}); the problem is too stiff for the explicit \
         integrator, reduce t* or move to a larger epsilon"
    )]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of integration steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("non-finite right-hand side encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (|r| = {residual:e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("closed-form minimizer {closed} and numeric minimizer {numeric} disagree")]
    MinimizerMismatch { closed: f64, numeric: f64 },

    #[error("shooting iterate left the admissible domain: xi = {xi:?}")]
    Inadmissible { xi: Vec<f64> },

    #[error("metric tensor is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate tangent plane (denominator {0:e})")]
    DegeneratePlane(f64),

    #[error("mixed partials not symmetric (defect {0:e})")]
    Asymmetry(f64),

    #[error("non-finite value while evaluating {what} at {point:?}")]
    NonFiniteValue { what: String, point: Vec<f64> },

    #[error("evaluation failed at {point:?}: {source}")]
    Node {
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &str, value: f64, reason: &str) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            value,
            reason: reason.to_string(),
        }
    }

    pub(crate) fn at(self, point: &[f64]) -> Self {
        match self {
            Error::Node { .. } => self,
            other => Error::Node {
                point: point.to_vec(),
                source: Box::new(other),
            },
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Dimension { .. }
            | Error::InvalidParameter { .. }
            | Error::UnknownModel(_)
            | Error::Unsupported(_)
            | Error::Parse(_) => true,
            Error::Node { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
