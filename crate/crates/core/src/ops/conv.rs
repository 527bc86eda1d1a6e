//! Stride-1 'same'-padded 2D cross-correlation.
//!
//! Accumulation order per output element: bias, then kernel taps in
//! `(ky, kx, c_in)` order. Out-of-image taps read zero and are skipped.

use rayon::prelude::*;

use crate::error::{shape_err, Result};
use crate::tensor::{Rng, Shape, Tensor};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    /// `[kh, kw, c_in, c_out]`
    pub kernel: Tensor<T>,
    /// `[c_out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = Self { kernel, bias };
        p.geometry()?;
        Ok(p)
    }

    /// He-initialized 3x3 kernel, zero bias.
    pub fn he(c_in: usize, c_out: usize, rng: &mut Rng) -> Result<Self> {
        let kernel = Tensor::he_init(Shape::new(&[3, 3, c_in, c_out])?, 9 * c_in, rng)?;
        let bias = Tensor::zeros(Shape::new(&[c_out])?);
        Self::new(kernel, bias)
    }

    /// `(kh, kw, c_in, c_out)`
    pub fn geometry(&self) -> Result<(usize, usize, usize, usize)> {
        let (kh, kw, ci, co) = match self.kernel.dims() {
            &[kh, kw, ci, co] => (kh, kw, ci, co),
            _ => return Err(shape_err!("conv kernel must be rank 4, got {}", self.kernel.shape())),
        };
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(shape_err!("'same' convolution needs odd kernel extents, got {kh}x{kw}"));
        }
        if self.bias.dims() != [co] {
            return Err(shape_err!("conv bias {} does not match {co} output channels", self.bias.shape()));
        }
        Ok((kh, kw, ci, co))
    }
}

#[derive(Clone, Debug)]
pub struct ConvTape<T> {
    input: Tensor<T>,
    kernel_dims: [usize; 4],
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<(Tensor<T>, ConvTape<T>)> {
    let (kh, kw, ci, co) = p.geometry()?;
    let (n, h, w, c) = x.shape().nhwc()?;
    if c != ci {
        return Err(shape_err!("conv2d: input has {c} channels, kernel expects {ci}"));
    }
    let (ph, pw) = (kh / 2, kw / 2);
    let xd = x.data();
    let kd = p.kernel.data();
    let bias = p.bias.data();
    let mut out = vec![T::zero(); n * h * w * co];

    out.par_chunks_mut(w * co).enumerate().for_each(|(row, yrow)| {
        let (b, oy) = (row / h, row % h);
        for ox in 0..w {
            let acc = &mut yrow[ox * co..(ox + 1) * co];
            acc.copy_from_slice(bias);
            for ky in 0..kh {
                let Some(iy) = (oy + ky).checked_sub(ph).filter(|&iy| iy < h) else {
                    continue;
                };
                for kx in 0..kw {
                    let Some(ix) = (ox + kx).checked_sub(pw).filter(|&ix| ix < w) else {
                        continue;
                    };
                    let px = &xd[((b * h + iy) * w + ix) * ci..][..ci];
                    let taps = &kd[(ky * kw + kx) * ci * co..][..ci * co];
                    for (cin, &v) in px.iter().enumerate() {
                        if v == T::zero() {
                            continue;
                        }
                        for (a, &k) in acc.iter_mut().zip(&taps[cin * co..(cin + 1) * co]) {
                            *a += v * k;
                        }
                    }
                }
            }
        }
    });

    let y = Tensor::from_vec(&[n, h, w, co], out)?;
    Ok((y, ConvTape { input: x.clone(), kernel_dims: [kh, kw, ci, co] }))
}

pub fn conv2d_backward<T: Scalar>(
    grad_y: &Tensor<T>,
    tape: &ConvTape<T>,
    p: &ConvParams<T>,
) -> Result<ConvGrads<T>> {
    let (kh, kw, ci, co) = p.geometry()?;
    if tape.kernel_dims != [kh, kw, ci, co] {
        return Err(shape_err!("conv2d_backward: tape recorded kernel {:?}, params are {}", tape.kernel_dims, p.kernel.shape()));
    }
    let x = &tape.input;
    let (n, h, w, _) = x.shape().nhwc()?;
    if grad_y.dims() != [n, h, w, co] {
        return Err(shape_err!("conv2d_backward: grad {} does not match output [{n},{h},{w},{co}]", grad_y.shape()));
    }
    let (ph, pw) = (kh / 2, kw / 2);
    let xd = x.data();
    let gd = grad_y.data();

    let mut grad_bias = vec![T::zero(); co];
    for px in gd.chunks_exact(co) {
        for (a, &g) in grad_bias.iter_mut().zip(px) {
            *a += g;
        }
    }

    // Input gradient, gathered per input pixel: the taps that read input
    // (iy, ix) at offset (ky, kx) wrote output (iy + ph - ky, ix + pw - kx).
    // Kernel transposed to [kh, kw, c_out, c_in] so the inner loop runs over c_in.
    let kd = p.kernel.data();
    let mut kt = vec![T::zero(); kd.len()];
    for tap in 0..kh * kw {
        for cin in 0..ci {
            for cout in 0..co {
                kt[(tap * co + cout) * ci + cin] = kd[(tap * ci + cin) * co + cout];
            }
        }
    }
    let mut gx = vec![T::zero(); n * h * w * ci];
    gx.par_chunks_mut(w * ci).enumerate().for_each(|(row, gxrow)| {
        let (b, iy) = (row / h, row % h);
        for ix in 0..w {
            let acc = &mut gxrow[ix * ci..(ix + 1) * ci];
            for ky in 0..kh {
                let Some(oy) = (iy + ph).checked_sub(ky).filter(|&oy| oy < h) else {
                    continue;
                };
                for kx in 0..kw {
                    let Some(ox) = (ix + pw).checked_sub(kx).filter(|&ox| ox < w) else {
                        continue;
                    };
                    let g = &gd[((b * h + oy) * w + ox) * co..][..co];
                    let taps = &kt[(ky * kw + kx) * co * ci..][..co * ci];
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

    // Kernel gradient, one task per tap; pixels summed in (b, oy, ox) order.
    let mut gk = vec![T::zero(); kd.len()];
    gk.par_chunks_mut(ci * co).enumerate().for_each(|(tap, gtap)| {
        let (ky, kx) = (tap / kw, tap % kw);
        for b in 0..n {
            for oy in 0..h {
                let Some(iy) = (oy + ky).checked_sub(ph).filter(|&iy| iy < h) else {
                    continue;
                };
                for ox in 0..w {
                    let Some(ix) = (ox + kx).checked_sub(pw).filter(|&ix| ix < w) else {
                        continue;
                    };
                    let px = &xd[((b * h + iy) * w + ix) * ci..][..ci];
                    let g = &gd[((b * h + oy) * w + ox) * co..][..co];
                    for (cin, &v) in px.iter().enumerate() {
                        if v == T::zero() {
                            continue;
                        }
                        for (a, &gv) in gtap[cin * co..(cin + 1) * co].iter_mut().zip(g) {
                            *a += v * gv;
                        }
                    }
                }
            }
        }
    });

    Ok(ConvGrads {
        input: Tensor::from_vec(&[n, h, w, ci], gx)?,
        kernel: Tensor::from_vec(&[kh, kw, ci, co], gk)?,
        bias: Tensor::from_vec(&[co], grad_bias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kernel: Vec<f64>, dims: [usize; 4]) -> ConvParams<f64> {
        let bias = Tensor::zeros(Shape::new(&[dims[3]]).unwrap());
        ConvParams::new(Tensor::from_vec(&dims, kernel).unwrap(), bias).unwrap()
    }

    #[test]
    fn ones_kernel_counts_neighbours() {
        let x = Tensor::<f64>::filled(&[1, 3, 3, 1], 1.0).unwrap();
        let (y, _) = conv2d_forward(&x, &params(vec![1.0; 9], [3, 3, 1, 1])).unwrap();
        assert_eq!(y.data(), &[4., 6., 4., 6., 9., 6., 4., 6., 4.]);
    }

    #[test]
    fn delta_kernel_is_identity_both_ways() {
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let p = params(k, [3, 3, 1, 1]);
        let mut rng = Rng::new(3);
        let x = Tensor::uniform(Shape::new(&[2, 4, 5, 1]).unwrap(), -1.0, 1.0, &mut rng);
        let (y, tape) = conv2d_forward(&x, &p).unwrap();
        assert_eq!(y, x);
        let g = Tensor::uniform(Shape::new(&[2, 4, 5, 1]).unwrap(), -1.0, 1.0, &mut rng);
        assert_eq!(conv2d_backward(&g, &tape, &p).unwrap().input, g);
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = Rng::new(4);
        let p = ConvParams::<f64>::he(2, 3, &mut rng).unwrap();
        let x = Tensor::uniform(Shape::new(&[1, 4, 4, 2]).unwrap(), -1.0, 1.0, &mut rng);
        let (y, tape) = conv2d_forward(&x, &p).unwrap();
        let grads = conv2d_backward(&Tensor::zeros(y.shape().clone()), &tape, &p).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        assert!(grads.kernel.data().iter().all(|&v| v == 0.0));
        assert!(grads.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_padding_preserves_extents() {
        let mut rng = Rng::new(5);
        let p = ConvParams::<f32>::he(1, 2, &mut rng).unwrap();
        for h in 1..=16 {
            for w in 1..=16 {
                let x = Tensor::<f32>::filled(&[1, h, w, 1], 0.5).unwrap();
                let (y, _) = conv2d_forward(&x, &p).unwrap();
                assert_eq!(y.dims(), &[1, h, w, 2]);
            }
        }
    }

    #[test]
    fn channel_mismatch() {
        let mut rng = Rng::new(6);
        let p = ConvParams::<f32>::he(2, 2, &mut rng).unwrap();
        let x = Tensor::<f32>::filled(&[1, 4, 4, 3], 0.5).unwrap();
        assert!(conv2d_forward(&x, &p).is_err());
    }

    #[test]
    fn gradient_shape_mismatch() {
        let mut rng = Rng::new(7);
        let p = ConvParams::<f32>::he(1, 2, &mut rng).unwrap();
        let x = Tensor::<f32>::filled(&[1, 4, 4, 1], 0.5).unwrap();
        let (_, tape) = conv2d_forward(&x, &p).unwrap();
        let bad = Tensor::<f32>::filled(&[1, 4, 4, 3], 1.0).unwrap();
        assert!(conv2d_backward(&bad, &tape, &p).is_err());
    }
}
