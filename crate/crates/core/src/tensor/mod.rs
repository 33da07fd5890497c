//! Dense f64 tensors with a reverse-mode gradient tape, the AdamW optimizer and the
//! binary weight checkpoint format.

pub mod audit;
pub mod checkpoint;
mod dense;
pub mod optim;
mod tape;

pub use dense::Tensor;
pub use optim::{adam_step, AdamConfig, AdamState, StepOutcome};
pub use tape::{gelu, gelu_grad, Gradients, Tape, Var};

/// Guard used by [`Var::l2_normalize`] callers throughout the model.
pub const L2_EPS: f64 = 1e-8;
