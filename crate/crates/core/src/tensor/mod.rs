//! Dense row-major tensors and the handful of array operations the layers
//! are built from.

mod linalg;
mod rng;
mod shape;

pub use linalg::{matmul, matmul_a_bt, matmul_at_b};
pub use rng::Rng;
pub use shape::{Shape, MAX_RANK};

use crate::error::{shape_err, Result};
use crate::Scalar;

#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, fill: T) -> Self {
        let data = vec![fill; shape.numel()];
        Self { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::new(shape, T::zero())
    }

    /// Builds a tensor from `dims`, validating both the shape and the
    /// buffer length.
    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        Self::from_shape_vec(shape, data)
    }

    pub fn from_shape_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(shape_err!(
                "buffer of {} elements does not fill shape {shape}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn filled(dims: &[usize], fill: T) -> Result<Self> {
        Ok(Self::new(Shape::new(dims)?, fill))
    }

    /// He-normal initialization: independent draws from
    /// `N(0, sqrt(2 / fan_in))`, in row-major order.
    pub fn he_init(shape: Shape, fan_in: usize, rng: &mut Rng) -> Result<Self> {
        if fan_in == 0 {
            return Err(shape_err!("he_init requires fan_in >= 1"));
        }
        let std = (2.0 / fan_in as f64).sqrt();
        let data = (0..shape.numel())
            .map(|_| T::of(rng.standard_normal() * std))
            .collect();
        Ok(Self { shape, data })
    }

    /// Uniform draws from `[lo, hi)`.
    pub fn uniform(shape: Shape, lo: f64, hi: f64, rng: &mut Rng) -> Self {
        let data = (0..shape.numel()).map(|_| rng.uniform_in(lo, hi)).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum in row-major order, accumulated in `f64`.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(shape_err!("{op}: shapes {} and {} differ", self.shape, other.shape));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn add_scalar(&self, s: T) -> Self {
        self.map(|v| v + s)
    }

    pub fn mul_scalar(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Elementwise `max(v, s)`; `max_scalar(0)` is ReLU.
    pub fn max_scalar(&self, s: T) -> Self {
        self.map(|v| if v > s { v } else { s })
    }

    /// Accumulates `other` into `self` in place.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err!("add_assign: shapes {} and {} differ", self.shape, other.shape));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        self.clone().into_reshaped(dims)
    }

    pub fn into_reshaped(self, dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.shape.numel() {
            return Err(shape_err!("cannot reshape {} into {shape}", self.shape));
        }
        Ok(Self { shape, data: self.data })
    }

    /// Flattens every axis after the first: `[b, ...] -> [b, prod(...)]`.
    pub fn flatten_batch(&self) -> Result<Self> {
        let b = self.dims()[0];
        self.reshape(&[b, self.len() / b])
    }

    pub fn transpose2(&self) -> Result<Self> {
        let (r, c) = self.shape.matrix()?;
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Self::from_vec(&[c, r], out)
    }

    /// Stacks `[b,h,w,c1]` and `[b,h,w,c2]` into `[b,h,w,c1+c2]`, channels
    /// of `a` first.
    pub fn concat_channels(a: &Self, b: &Self) -> Result<Self> {
        let (n, h, w, c1) = a.shape.nhwc()?;
        let (n2, h2, w2, c2) = b.shape.nhwc()?;
        if (n, h, w) != (n2, h2, w2) {
            return Err(shape_err!("concat_channels: {} and {} differ outside channels", a.shape, b.shape));
        }
        let c = c1 + c2;
        let mut data = Vec::with_capacity(n * h * w * c);
        for (pa, pb) in a.data.chunks_exact(c1).zip(b.data.chunks_exact(c2)) {
            data.extend_from_slice(pa);
            data.extend_from_slice(pb);
        }
        Self::from_vec(&[n, h, w, c], data)
    }

    /// Inverse of [`Tensor::concat_channels`]: the first `c1` channels and the rest.
    pub fn split_channels(&self, c1: usize) -> Result<(Self, Self)> {
        let (n, h, w, c) = self.shape.nhwc()?;
        if c1 == 0 || c1 >= c {
            return Err(shape_err!("split_channels: cannot split {c} channels at {c1}"));
        }
        let c2 = c - c1;
        let mut a = Vec::with_capacity(n * h * w * c1);
        let mut b = Vec::with_capacity(n * h * w * c2);
        for px in self.data.chunks_exact(c) {
            a.extend_from_slice(&px[..c1]);
            b.extend_from_slice(&px[c1..]);
        }
        Ok((Self::from_vec(&[n, h, w, c1], a)?, Self::from_vec(&[n, h, w, c2], b)?))
    }

    /// Copies batch entries `[start, start+count)` of a tensor whose first axis is batch.
    pub fn batch_slice(&self, start: usize, count: usize) -> Result<Self> {
        let b = self.dims()[0];
        if count == 0 || start + count > b {
            return Err(shape_err!("batch_slice {start}+{count} out of range for {}", self.shape));
        }
        let per = self.len() / b;
        let mut dims = self.dims().to_vec();
        dims[0] = count;
        Self::from_vec(&dims, self.data[start * per..(start + count) * per].to_vec())
    }

    /// Concatenates tensors of equal per-item shape along the batch axis.
    pub fn stack_batch(items: &[&Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| shape_err!("stack_batch of nothing"))?;
        let mut dims = vec![items.len()];
        dims.extend_from_slice(first.dims());
        let mut data = Vec::with_capacity(items.len() * first.len());
        for t in items {
            if t.shape != first.shape {
                return Err(shape_err!("stack_batch: {} differs from {}", t.shape, first.shape));
            }
            data.extend_from_slice(&t.data);
        }
        Self::from_vec(&dims, data)
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{}", self.shape)?;
        let head = &self.data[..self.data.len().min(SHOWN)];
        write!(f, "{head:?}")?;
        if self.data.len() > SHOWN {
            write!(f, "...")?;
        }
        Ok(())
    }
}
