//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Operations are recorded on a [`Tape`] as they execute and replayed in
//! reverse by [`Tape::backward`]. The operator set is the one the separation
//! model and its losses need: valid-mode (grouped, dilated) convolution and
//! its transpose, PReLU/sigmoid/ReLU, global layer norm, and a handful of
//! elementwise and reduction ops.

mod check;
mod kernels;
mod tape;
mod tensor;

pub use check::finite_difference_check;
pub use kernels::ConvGeometry;
pub use tape::{Activation, ConvOptions, NodeId, Tape};
pub use tensor::Tensor;
