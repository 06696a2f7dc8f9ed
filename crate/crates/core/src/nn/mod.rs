//! Differentiable building blocks: tensors, a reverse-mode tape, the
//! convolution/pooling kernels used by the U-nets, parameter storage,
//! initialization and a finite-difference checker.

pub mod gradcheck;
mod graph;
mod init;
pub mod kernels;
mod params;
mod scalar;
mod tensor;

pub use graph::{Graph, NodeId};
pub use init::{init_bias, init_weights};
pub use params::{ParamId, ParamStore, Parameter};
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor4;
