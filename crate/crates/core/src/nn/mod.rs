//! Dense tensors with hand-written backward passes for the CNN feature
//! extractor, the loss and the optimizer.

pub mod checkpoint;
mod loss;
pub mod ops;
mod optim;
mod tensor;

pub use loss::{softmax, softmax_cross_entropy};
pub use optim::SgdNesterov;
pub use tensor::Tensor;
