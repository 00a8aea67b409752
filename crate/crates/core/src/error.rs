use thiserror::Error;

use crate::torus::IntVec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lift is not closed: residual {residual:e} exceeds tolerance")]
    BrokenLift { residual: f64 },
    #[error("profile violates constraint `{constraint}`")]
    InvalidProfile { constraint: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("trajectory class {trajectory:?} differs from reference class {reference:?}")]
    ClassMismatch {
        trajectory: IntVec2,
        reference: IntVec2,
    },
    #[error("wrap {wrap} cannot be realized for class {class:?}")]
    InvalidWrap { wrap: i64, class: IntVec2 },
    #[error("capping boundary passes through the density disk")]
    CappingThroughDisk,
    #[error("class {0:?} has no isolated 1-periodic points (h' is flat at this velocity)")]
    NonIsolated(IntVec2),
    #[error("spectrum needs at least two values, got {0}")]
    InsufficientSpectrum(usize),
    #[error("enumeration incomplete: wraps beyond k = {kmax} could lower the bound")]
    IncompleteEnumeration { kmax: u32 },
    #[error("certificate unavailable: {0}")]
    CertificateUnavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} must be finite")))
    }
}
