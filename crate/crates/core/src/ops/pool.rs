use rayon::prelude::*;

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;
use crate::Scalar;

/// 2x2 window, stride 2. Halves both spatial extents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PoolSpec;

impl PoolSpec {
    pub const WINDOW: usize = 2;
    pub const STRIDE: usize = 2;
}

/// Flat input index of the winning element for every output element.
#[derive(Clone, Debug)]
pub struct PoolTape {
    input_dims: [usize; 4],
    argmax: Vec<usize>,
}

/// Max over each 2x2 window. Ties go to the first maximum in row-major
/// window order.
pub fn maxpool2d_forward<T: Scalar>(x: &Tensor<T>, _spec: PoolSpec) -> Result<(Tensor<T>, PoolTape)> {
    let (n, h, w, c) = x.shape().nhwc()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err!("maxpool2d: spatial extents {h}x{w} must be even"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = vec![T::zero(); n * oh * ow * c];
    let mut argmax = vec![0usize; out.len()];

    out.par_chunks_mut(ow * c)
        .zip(argmax.par_chunks_mut(ow * c))
        .enumerate()
        .for_each(|(row, (yrow, arow))| {
            let (b, oy) = (row / oh, row % oh);
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((b * h + 2 * oy) * w + 2 * ox) * c + ch;
                    let mut best = xd[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                    yrow[ox * c + ch] = best;
                    arow[ox * c + ch] = best_idx;
                }
            }
        });

    let y = Tensor::from_vec(&[n, oh, ow, c], out)?;
    Ok((y, PoolTape { input_dims: [n, h, w, c], argmax }))
}

/// Routes each output gradient to the input element that won its window.
pub fn maxpool2d_backward<T: Scalar>(grad_y: &Tensor<T>, tape: &PoolTape) -> Result<Tensor<T>> {
    let [n, h, w, c] = tape.input_dims;
    if grad_y.dims() != [n, h / 2, w / 2, c] {
        return Err(shape_err!("maxpool2d_backward: grad {} does not match pooled [{n},{},{},{c}]", grad_y.shape(), h / 2, w / 2));
    }
    let mut gx = vec![T::zero(); n * h * w * c];
    for (&idx, &g) in tape.argmax.iter().zip(grad_y.data()) {
        gx[idx] += g;
    }
    Tensor::from_vec(&[n, h, w, c], gx)
}
