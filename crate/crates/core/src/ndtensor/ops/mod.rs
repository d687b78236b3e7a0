//! Differentiable operations. Each file holds the forward kernel, its
//! adjoint, and the [`Tape`](super::Tape) method that records it.

pub mod activation;
pub mod conv;
pub mod elementwise;
pub mod fixed;
pub mod loss;
pub mod norm;
pub mod pool;
pub mod shape;
