use thiserror::Error;

use crate::approx::ApproxError;
use crate::fnspace::FnSpaceError;
use crate::harness::HarnessError;
use crate::moduli::ModulusError;
use crate::quad::QuadError;
use crate::shape::ShapeError;
use crate::stieltjes::LsError;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error; each module keeps its own error enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    FnSpace(#[from] FnSpaceError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Stieltjes(#[from] LsError),
    #[error(transparent)]
    Modulus(#[from] ModulusError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl Error {
    /// True when the error reports a violated mathematical hypothesis
    /// (inadmissible weight, smoothness deficit, step bound) rather than bad input.
    pub fn is_hypothesis_violation(&self) -> bool {
        match self {
            Error::FnSpace(e) => matches!(e, FnSpaceError::InadmissibleExponent { .. }),
            Error::Modulus(e) => e.is_hypothesis_violation(),
            Error::Quad(QuadError::Weight(_)) => true,
            Error::Approx(e) => e.is_hypothesis_violation(),
            Error::Harness(HarnessError::Hypothesis(_)) => true,
            _ => false,
        }
    }
}
