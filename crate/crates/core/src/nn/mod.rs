//! Minimal CNN core: tensors, convolution and dense layers with exact
//! backpropagation, ReLU, Huber loss, Adam and gradient checking.

mod adam;
pub mod gradcheck;
mod layers;
mod loss;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use layers::{Chain, ChainCache, LayerSpec};
pub use loss::huber_loss;
pub use tensor::{Scalar, Tensor};
