//! Dense f64 tensors with define-by-run reverse-mode differentiation,
//! an AdamW optimizer, a finite-difference gradient oracle and the
//! parameter checkpoint format.

mod checkpoint;
mod graph;
mod gradcheck;
mod ops;
mod optim;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointEntry};
pub use gradcheck::{finite_diff_check_params, ParamCheck, Stencil, analytic_gradient, finite_diff_check, numeric_gradient, relative_error};
pub use graph::{CustomOp, Gradients, Graph, Var};
pub use ops::NORM_EPS;
pub use optim::{adamw_step, AdamWConfig, OptimizerState};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
