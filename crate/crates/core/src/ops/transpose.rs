//! Stride-2 transposed convolution with a 2x2 kernel.
//!
//! Kernel extent equals stride, so every output pixel receives exactly one
//! input pixel: `y[2i+dy, 2j+dx, co] = bias[co] + Σ_ci x[i, j, ci] · k[dy, dx, co, ci]`,
//! summed over `ci` in order.

use rayon::prelude::*;

use crate::error::{shape_err, Result};
use crate::tensor::{Rng, Shape, Tensor};
use crate::Scalar;

pub const UPSAMPLE: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct TransposeConvParams<T> {
    /// `[2, 2, c_out, c_in]`
    pub kernel: Tensor<T>,
    /// `[c_out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> TransposeConvParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = Self { kernel, bias };
        p.geometry()?;
        Ok(p)
    }

    /// He-initialized with fan-in `c_in`: each output element sums exactly
    /// `c_in` products.
    pub fn he(c_in: usize, c_out: usize, rng: &mut Rng) -> Result<Self> {
        let kernel = Tensor::he_init(Shape::new(&[UPSAMPLE, UPSAMPLE, c_out, c_in])?, c_in, rng)?;
        let bias = Tensor::zeros(Shape::new(&[c_out])?);
        Self::new(kernel, bias)
    }

    /// `(c_in, c_out)`
    pub fn geometry(&self) -> Result<(usize, usize)> {
        let (co, ci) = match self.kernel.dims() {
            &[UPSAMPLE, UPSAMPLE, co, ci] => (co, ci),
            _ => return Err(shape_err!("transposed conv kernel must be [2,2,c_out,c_in], got {}", self.kernel.shape())),
        };
        if self.bias.dims() != [co] {
            return Err(shape_err!("transposed conv bias {} does not match {co} output channels", self.bias.shape()));
        }
        Ok((ci, co))
    }
}

#[derive(Clone, Debug)]
pub struct TransposeConvTape<T> {
    input: Tensor<T>,
    channels: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct TransposeConvGrads<T> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_transpose_forward<T: Scalar>(
    x: &Tensor<T>,
    p: &TransposeConvParams<T>,
) -> Result<(Tensor<T>, TransposeConvTape<T>)> {
    let (ci, co) = p.geometry()?;
    let (n, h, w, c) = x.shape().nhwc()?;
    if c != ci {
        return Err(shape_err!("conv2d_transpose: input has {c} channels, kernel expects {ci}"));
    }
    let (oh, ow) = (h * UPSAMPLE, w * UPSAMPLE);
    let xd = x.data();
    let kd = p.kernel.data();
    let bias = p.bias.data();

    // [2, 2, c_in, c_out] so the inner loop runs over c_out.
    let mut kt = vec![T::zero(); kd.len()];
    for tap in 0..UPSAMPLE * UPSAMPLE {
        for cout in 0..co {
            for cin in 0..ci {
                kt[(tap * ci + cin) * co + cout] = kd[(tap * co + cout) * ci + cin];
            }
        }
    }

    let mut out = vec![T::zero(); n * oh * ow * co];
    out.par_chunks_mut(ow * co).enumerate().for_each(|(row, yrow)| {
        let (b, oy) = (row / oh, row % oh);
        let (iy, dy) = (oy / UPSAMPLE, oy % UPSAMPLE);
        for ox in 0..ow {
            let (ix, dx) = (ox / UPSAMPLE, ox % UPSAMPLE);
            let acc = &mut yrow[ox * co..(ox + 1) * co];
            acc.copy_from_slice(bias);
            let px = &xd[((b * h + iy) * w + ix) * ci..][..ci];
            let taps = &kt[(dy * UPSAMPLE + dx) * ci * co..][..ci * co];
            for (cin, &v) in px.iter().enumerate() {
                if v == T::zero() {
                    continue;
                }
                for (a, &k) in acc.iter_mut().zip(&taps[cin * co..(cin + 1) * co]) {
                    *a += v * k;
                }
            }
        }
    });

    let y = Tensor::from_vec(&[n, oh, ow, co], out)?;
    Ok((y, TransposeConvTape { input: x.clone(), channels: (ci, co) }))
}

pub fn conv2d_transpose_backward<T: Scalar>(
    grad_y: &Tensor<T>,
    tape: &TransposeConvTape<T>,
    p: &TransposeConvParams<T>,
) -> Result<TransposeConvGrads<T>> {
    let (ci, co) = p.geometry()?;
    if tape.channels != (ci, co) {
        return Err(shape_err!("conv2d_transpose_backward: tape recorded {:?} channels, params are ({ci}, {co})", tape.channels));
    }
    let x = &tape.input;
    let (n, h, w, _) = x.shape().nhwc()?;
    let (oh, ow) = (h * UPSAMPLE, w * UPSAMPLE);
    if grad_y.dims() != [n, oh, ow, co] {
        return Err(shape_err!("conv2d_transpose_backward: grad {} does not match output [{n},{oh},{ow},{co}]", grad_y.shape()));
    }
    let xd = x.data();
    let gd = grad_y.data();
    let kd = p.kernel.data();

    let mut grad_bias = vec![T::zero(); co];
    for px in gd.chunks_exact(co) {
        for (a, &g) in grad_bias.iter_mut().zip(px) {
            *a += g;
        }
    }

    // Input gradient is a stride-2 2x2 gather of grad_y, taps in (dy, dx, c_out) order.
    let mut gx = vec![T::zero(); n * h * w * ci];
    gx.par_chunks_mut(w * ci).enumerate().for_each(|(row, gxrow)| {
        let (b, iy) = (row / h, row % h);
        for ix in 0..w {
            let acc = &mut gxrow[ix * ci..(ix + 1) * ci];
            for dy in 0..UPSAMPLE {
                for dx in 0..UPSAMPLE {
                    let (oy, ox) = (iy * UPSAMPLE + dy, ix * UPSAMPLE + dx);
                    let g = &gd[((b * oh + oy) * ow + ox) * co..][..co];
                    let taps = &kd[(dy * UPSAMPLE + dx) * co * ci..][..co * ci];
                    for (cout, &gv) in g.iter().enumerate() {
                        if gv == T::zero() {
                            continue;
                        }
                        for (a, &k) in acc.iter_mut().zip(&taps[cout * ci..(cout + 1) * ci]) {
                            *a += gv * k;
                        }
                    }
                }
            }
        }
    });

    // Kernel gradient, one task per tap; pixels summed in (b, iy, ix) order.
    let mut gk = vec![T::zero(); kd.len()];
    gk.par_chunks_mut(co * ci).enumerate().for_each(|(tap, gtap)| {
        let (dy, dx) = (tap / UPSAMPLE, tap % UPSAMPLE);
        for b in 0..n {
            for iy in 0..h {
                for ix in 0..w {
                    let px = &xd[((b * h + iy) * w + ix) * ci..][..ci];
                    let (oy, ox) = (iy * UPSAMPLE + dy, ix * UPSAMPLE + dx);
                    let g = &gd[((b * oh + oy) * ow + ox) * co..][..co];
                    for (cout, &gv) in g.iter().enumerate() {
                        if gv == T::zero() {
                            continue;
                        }
                        for (a, &v) in gtap[cout * ci..(cout + 1) * ci].iter_mut().zip(px) {
                            *a += gv * v;
                        }
                    }
                }
            }
        }
    });

    Ok(TransposeConvGrads {
        input: Tensor::from_vec(&[n, h, w, ci], gx)?,
        kernel: Tensor::from_vec(&[UPSAMPLE, UPSAMPLE, co, ci], gk)?,
        bias: Tensor::from_vec(&[co], grad_bias)?,
    })
}
