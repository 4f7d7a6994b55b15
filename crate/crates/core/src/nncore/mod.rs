//! Small deterministic neural-network core: dense tensors, tanh MLPs with
//! exact reverse-mode gradients, Adam, loss primitives, a central-difference
//! oracle and a binary checkpoint format. All arithmetic is f64.

mod checkpoint;
mod gradcheck;
mod loss;
mod mlp;
mod optim;
mod tensor;

pub use checkpoint::{
    checkpoint_bytes, parse_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error};
pub use loss::{cosine_loss, cosine_pair, mse_loss, mse_pair};
pub use mlp::{
    mlp_backward, mlp_forward, Activation, Layer, LayerGrad, MlpCache, MlpGrads, MlpParams,
};
pub use optim::{adam_step, AdamConfig, OptState};
pub use tensor::Tensor;
