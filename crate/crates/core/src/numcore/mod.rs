//! Dense numeric layer with exact reverse-mode gradients over a fixed set of
//! primitives, plus optimizers, finite-difference checking and checkpoints.
//!
//! All arithmetic is 64-bit. Training and verification share one code path.

mod checkpoint;
mod gradcheck;
mod lstm;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, Objective, ParamCheck, Stencil};
pub use lstm::{lstm_step, LstmParams};
pub use optim::{clip_grad_norm, Adam, Method, Optimizer, DEFAULT_CLIP_NORM};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
