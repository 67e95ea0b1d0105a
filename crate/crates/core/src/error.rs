use thiserror::Error;

use crate::function_space::Representation;

pub type Result<T> = std::result::Result<T, PhmcError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhmcError {
    #[error("incompatible discretizations: dimension {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("representation mismatch: expected {expected:?}, found {found:?}")]
    RepresentationMismatch {
        expected: Representation,
        found: Representation,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },

    #[error("trajectory has {found} states, expected {expected}")]
    TrajectoryLength { expected: usize, found: usize },

    #[error("exact pHMC needs a closed-form flow or a fine-step surrogate; potential `{potential}` has neither")]
    ExactFlowUnavailable { potential: String },

    #[error("insufficient data: need at least {needed} usable points, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("every sampled pair was degenerate (x = y)")]
    DegeneratePairs,

    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<PhmcError>,
    },
}

impl PhmcError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        PhmcError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        PhmcError::AtIteration {
            iter,
            source: Box::new(self),
        }
    }

    /// Strips any iteration wrappers.
    pub fn root_cause(&self) -> &PhmcError {
        match self {
            PhmcError::AtIteration { source, .. } => source.root_cause(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self.root_cause(), PhmcError::Divergence { .. })
    }
}
