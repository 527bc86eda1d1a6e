//! UNET and stacked-UNET image classifiers built on a small, explicit
//! tensor and layer library.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). Training
//! runs in `f32`; gradient checks and reference computations use `f64`
//! through the same code paths. The aliases below name the common choices.

pub mod data;
pub mod error;
pub mod model;
pub mod ops;
mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Rng, Shape, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;

pub type UNet32 = model::ModelGraph<f32>;
pub type UNet64 = model::ModelGraph<f64>;
