use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside its documented domain.
    InvalidParameter { name: &'static str, reason: String },
    /// Orthonormalization lost accuracy beyond the accepted residual.
    BasisConditioning { n: usize, residual: f64 },
    /// The derivative matrix does not have the unit upper-triangular shape.
    DerivativeMatrix { reason: String },
    /// A level-set region came out empty on the grid.
    EmptyRegion { region: &'static str },
    /// `exp(2λξ)` would overflow.
    WeightOverflow { exponent: f64 },
    /// The iterative linear solver did not reach its tolerance.
    NoConvergence { iterations: usize, residual: f64 },
    /// The operator handed to conjugate gradients is not positive definite.
    NotPositiveDefinite,
    /// A quantity that must stay strictly positive did not.
    Positivity { what: &'static str, value: f64 },
    /// The coefficient violates `a₀ ≤ 0` on Ω or `a₀ = 0` outside Ω.
    CoefficientSign { value: f64 },
    /// A field does not satisfy the zero Cauchy data required on Γ.
    BoundaryClass { max_violation: f64 },
    /// Gradient projection kept increasing the functional.
    Divergence { iteration: usize, value: f64 },
    /// Not enough samples along x₀ for the projection quadrature.
    TooFewSamples { got: usize, need: usize },
    /// Inputs of inconsistent size.
    ShapeMismatch { what: &'static str },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Numerical failures are positivity loss, divergence and solver breakdown;
    /// everything else is a violated precondition or invariant.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NotPositiveDefinite
                | Error::Positivity { .. }
                | Error::Divergence { .. }
                | Error::WeightOverflow { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::BasisConditioning { n, residual } => write!(
                f,
                "basis of size {n} lost orthonormality (gram residual {residual:.3e})"
            ),
            Error::DerivativeMatrix { reason } => write!(f, "derivative matrix: {reason}"),
            Error::EmptyRegion { region } => write!(f, "region {region} is empty on this grid"),
            Error::WeightOverflow { exponent } => {
                write!(f, "Carleman weight overflows: exponent {exponent:.3} > 700")
            }
            Error::NoConvergence {
                iterations,
                residual,
            } => write!(
                f,
                "linear solver did not converge in {iterations} iterations (relative residual {residual:.3e})"
            ),
            Error::NotPositiveDefinite => write!(f, "operator is not positive definite"),
            Error::Positivity { what, value } => {
                write!(f, "{what} must be positive, found {value:.6e}")
            }
            Error::CoefficientSign { value } => write!(
                f,
                "coefficient must satisfy a₀ ≤ 0 on Ω and a₀ = 0 outside Ω (found {value:.6e})"
            ),
            Error::BoundaryClass { max_violation } => write!(
                f,
                "field violates zero Cauchy data on Γ (max {max_violation:.3e})"
            ),
            Error::Divergence { iteration, value } => write!(
                f,
                "functional increased for 10 consecutive iterations (n = {iteration}, J = {value:.6e}); reduce the step"
            ),
            Error::TooFewSamples { got, need } => {
                write!(f, "need at least {need} samples, got {got}")
            }
            Error::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
        }
    }
}

impl core::error::Error for Error {}
