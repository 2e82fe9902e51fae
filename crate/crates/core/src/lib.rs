//! Adversarial style augmentation at desk scale.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`]: dense `f64` tensors, a reverse-mode tape and the ADVT file
//!   format.
//! * [`style`]: channel statistics, AdaIN re-styling, gradient reversal,
//!   AdvStyle and the batch-statistics baselines.
//! * [`nn`]: the parameter registry and MiniNet with its six insertion points.
//! * [`train`]: optimizers and the two adversarial training procedures.
//! * [`data`]: the procedural multi-domain glyph benchmark.
//! * [`metrics`]: accuracy, cross-domain aggregation, 𝒜-distance and PCA.
//! * [`verify`]: gradient-check suites shared by tests and the CLI.

pub mod data;
pub mod metrics;
pub mod nn;
pub mod style;
pub mod tensor;
pub mod train;
pub mod verify;

pub use tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Format(#[from] tensor::FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },
    #[error("non-finite loss {loss} at step {step} (epoch {epoch})")]
    NonFiniteLoss { step: usize, epoch: usize, loss: f64 },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Self::Invalid {
            what,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
