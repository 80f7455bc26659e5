//! Differentiation engine.
//!
//! Input derivatives up to second order travel forward inside [`Jet2`];
//! parameter gradients come from the reverse-mode [`Tape`]. The two
//! compose: a `Jet2<Var>` carries taped channels, so a loss built from
//! second-order input partials can still be differentiated with respect
//! to the parameters that produced them.

mod jet;
mod scalar;
mod tape;

use thiserror::Error;

pub use jet::{jet_eval, Channels, Jet2};
pub use scalar::Scalar;
pub use tape::{param_gradient, Gradient, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("{primitive}: argument {arg} is outside the primitive's domain")]
    Domain { primitive: &'static str, arg: f64 },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("loss evaluated to {value} at the given parameters")]
    NonFiniteLoss { value: f64, params: Vec<f64> },
}
