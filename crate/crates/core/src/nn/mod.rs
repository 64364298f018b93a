//! Dense feed-forward networks on `f64`: forward pass, losses, exact
//! gradients, and plain SGD.

mod checkpoint;
mod gradcheck;
mod loss;
mod mlp;
mod tensor;

pub use checkpoint::{checkpoint_string, parse_checkpoint, read_checkpoint, write_checkpoint};
pub use gradcheck::{check_gradient, finite_difference_grad, GradCheck};
pub use loss::{Batch, LossKind, DEFAULT_DISTILLATION_ALPHA};
pub use mlp::{argmax, sgd_step, Activation, MlpSpec, Model};
pub use tensor::Tensor;
