//! Differentiable core: dense networks, exact input gradients, second-order
//! loss gradients and the Adam optimizer. Everything runs in `f64`.

mod adam;
mod grad;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use grad::{
    backward, forward_tape, input_gradient, input_gradient_backward, input_gradient_batch,
    input_gradient_tape, loss_and_gradient, loss_param_gradient, loss_value, predict,
    symplectic_permute, symplectic_permute_rows, DatasetBatch, GradTape, LossGrad, LossKind, Tape,
};
pub use mlp::{Activation, Gradients, MlpParams, SCHEMA_VERSION};
