//! Forward and backward passes for each layer primitive.
//!
//! Every forward returns its output together with a tape holding exactly
//! what the matching backward needs. Tapes are plain values, so a forward /
//! backward pair can run on any thread.

mod activation;
mod conv;
mod dense;
mod loss;
mod pool;
mod transpose;

pub use activation::{relu, relu_backward, ReluTape};
pub(crate) use activation::{relu_backward_in_place, relu_in_place};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams, ConvTape};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams, DenseTape};
pub use loss::{softmax, softmax_cross_entropy, CrossEntropy};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolSpec, PoolTape};
pub use transpose::{
    conv2d_transpose_backward, conv2d_transpose_forward, TransposeConvGrads, TransposeConvParams,
    TransposeConvTape,
};
