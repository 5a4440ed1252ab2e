use crate::divergence::Alpha;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("reference state has zero population at level {level}")]
    UnsupportedReference { level: usize },

    #[error("divergence is infinite: alpha = {alpha} < 0 with zero population at level {level}")]
    DivergentInput { level: usize, alpha: f64 },

    #[error("free energy is undefined at infinite temperature (beta = 0)")]
    UndefinedTemperature,

    #[error("block {block} is not unitary (max deviation {deviation:e})")]
    NonUnitaryBlock { block: usize, deviation: f64 },

    #[error("block {block} has dimension {found}, expected {expected}")]
    BlockDimension {
        block: usize,
        expected: usize,
        found: usize,
    },

    #[error("quadrature did not converge: change {change:e} at {nodes} nodes")]
    QuadratureNotConverged { nodes: usize, change: f64 },

    #[error("collision produced coherences of magnitude {magnitude:e}")]
    CoherenceLeak { magnitude: f64 },

    #[error("at alpha = {alpha}: {source}")]
    AtAlpha { alpha: Alpha, source: Box<Error> },
}

impl Error {
    /// Failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::QuadratureNotConverged { .. } | Error::CoherenceLeak { .. } => true,
            Error::AtAlpha { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
