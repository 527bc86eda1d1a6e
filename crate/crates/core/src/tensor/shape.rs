use std::fmt;

use crate::error::{shape_err, Result};

/// Extents of a tensor, outermost first. Rank-4 tensors are laid out as
/// batch x height x width x channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

pub const MAX_RANK: usize = 4;

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(shape_err!("rank must be 1..={MAX_RANK}, got {}", dims.len()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(shape_err!("extent {pos} of {dims:?} is zero"));
        }
        let mut count: usize = 1;
        for &d in dims {
            count = count
                .checked_mul(d)
                .ok_or_else(|| shape_err!("element count of {dims:?} overflows"))?;
        }
        // Vec<T> cannot hold more than isize::MAX bytes; f64 is the widest scalar.
        if count > (isize::MAX as usize) / 8 {
            return Err(shape_err!("element count of {dims:?} exceeds addressable memory"));
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// `(batch, height, width, channels)` of a rank-4 shape.
    pub fn nhwc(&self) -> Result<(usize, usize, usize, usize)> {
        match self.dims[..] {
            [n, h, w, c] => Ok((n, h, w, c)),
            _ => Err(shape_err!("expected rank-4 NHWC shape, got {self}")),
        }
    }

    /// `(rows, cols)` of a rank-2 shape.
    pub fn matrix(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [r, c] => Ok((r, c)),
            _ => Err(shape_err!("expected rank-2 shape, got {self}")),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl TryFrom<&[usize]> for Shape {
    type Error = crate::Error;

    fn try_from(dims: &[usize]) -> Result<Self> {
        Shape::new(dims)
    }
}

impl<const N: usize> TryFrom<[usize; N]> for Shape {
    type Error = crate::Error;

    fn try_from(dims: [usize; N]) -> Result<Self> {
        Shape::new(&dims)
    }
}
