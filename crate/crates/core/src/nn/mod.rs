//! A small reverse-mode differentiable core.
//!
//! Values are dense 2D arrays. Batches of walks are stored *step-major*: row
//! `p * walks + j` holds step `p` of walk `j`, so every convolution tap is a
//! single contiguous matrix product.

mod graph;
mod layers;
mod optim;
mod tensor;

#[cfg(test)]
mod tests;

pub use graph::{Grads, Graph, NnError, Var};
pub use layers::{conv_kernels_for_window, ConvLayer, ConvStack, Linear, Mlp, ParamId, ParamStore};
pub use optim::{Adam, OptimizerState, PlateauSchedule, PlateauStep};
pub use tensor::{conv1d_forward, segment_pool, PoolMode, Tensor};

use std::fmt::{Debug, Display};

/// Floating-point element type: `f32` for training, `f64` for gradient checks.
pub trait Real: ndarray::NdFloat + Default + Debug + Display + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
