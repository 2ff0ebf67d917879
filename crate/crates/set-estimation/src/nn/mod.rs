//! Tensors, reverse-mode differentiation, Adam, and gradient checking.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::grad_check;
pub use graph::{Graph, NodeId, LN_EPS};
pub use tensor::Tensor;
