mod support;

use support::{dot, random};
use unet_core::ops::*;
use unet_core::tensor::Rng;
use unet_core::Tensor;

/// Stride-2 2x2 gather of `gy` with the transposed-conv kernel
/// `[2, 2, c_out, c_in]`, written from the scatter definition.
fn stride2_gather(gy: &Tensor<f64>, k: &Tensor<f64>) -> Tensor<f64> {
    let [b, oh, ow, co] = gy.dims().try_into().unwrap();
    let ci = k.dims()[3];
    let (h, w) = (oh / 2, ow / 2);
    let mut out = vec![0.0; b * h * w * ci];
    for n in 0..b {
        for i in 0..h {
            for j in 0..w {
                for c in 0..ci {
                    let mut acc = 0.0;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            for o in 0..co {
                                let g = gy.data()[((n * oh + 2 * i + dy) * ow + 2 * j + dx) * co + o];
                                acc += g * k.data()[((dy * 2 + dx) * co + o) * ci + c];
                            }
                        }
                    }
                    out[((n * h + i) * w + j) * ci + c] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[b, h, w, ci], out).unwrap()
}

#[test]
fn transpose_conv_is_adjoint_of_stride2_gather() {
    for seed in 0..5 {
        let mut rng = Rng::new(seed);
        let (ci, co) = (1 + rng.below(3), 1 + rng.below(3));
        let x = random(&[2, 3, 2, ci], -1.0, 1.0, &mut rng);
        let k = random(&[2, 2, co, ci], -1.0, 1.0, &mut rng);
        let p = TransposeConvParams::new(k.clone(), Tensor::zeros(unet_core::Shape::new(&[co]).unwrap())).unwrap();
        let (y, tape) = conv2d_transpose_forward(&x, &p).unwrap();
        let gy = random(y.dims(), -1.0, 1.0, &mut rng);
        let gx = conv2d_transpose_backward(&gy, &tape, &p).unwrap().input;
        let oracle = stride2_gather(&gy, &k);
        for (a, b) in gx.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // <T x, gy> == <x, T* gy>
        assert!((dot(y.data(), gy.data()) - dot(x.data(), gx.data())).abs() < 1e-10);
    }
}

#[test]
fn single_pixel_scatter() {
    let k = Tensor::from_vec(&[2, 2, 1, 1], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
    let p = TransposeConvParams::new(k.clone(), Tensor::from_vec(&[1], vec![0.0]).unwrap()).unwrap();
    let x = Tensor::from_vec(&[1, 1, 1, 1], vec![2.0]).unwrap();
    let (y, _) = conv2d_transpose_forward(&x, &p).unwrap();
    assert_eq!(y.dims(), &[1, 2, 2, 1]);
    assert_eq!(y.data(), &[2.0, -4.0, 6.0, 1.0]);
}

fn naive_conv_at(x: &Tensor<f32>, k: &Tensor<f32>, bias: f32, n: usize, oy: usize, ox: usize, o: usize) -> f64 {
    let [_, h, w, ci] = x.dims().try_into().unwrap();
    let co = k.dims()[3];
    let mut acc = bias as f64;
    for ky in 0..3 {
        for kx in 0..3 {
            let (iy, ix) = (oy as isize + ky as isize - 1, ox as isize + kx as isize - 1);
            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                continue;
            }
            for c in 0..ci {
                let xv = x.data()[((n * h + iy as usize) * w + ix as usize) * ci + c] as f64;
                acc += xv * k.data()[((ky * 3 + kx) * ci + c) * co + o] as f64;
            }
        }
    }
    acc
}

#[test]
fn full_resolution_first_conv() {
    let mut rng = Rng::new(5);
    let x: Tensor<f32> = Tensor::uniform(unet_core::Shape::new(&[1, 256, 256, 1]).unwrap(), 0.0, 1.0, &mut rng);
    let p = ConvParams::<f32>::he(1, 64, &mut rng).unwrap();
    let (y, _) = conv2d_forward(&x, &p).unwrap();
    assert_eq!(y.dims(), &[1, 256, 256, 64]);
    for &(oy, ox, o) in &[(0, 0, 0), (0, 255, 13), (128, 77, 63), (255, 255, 31), (255, 0, 7)] {
        let want = naive_conv_at(&x, &p.kernel, p.bias.data()[o], 0, oy, ox, o);
        let got = y.data()[(oy * 256 + ox) * 64 + o] as f64;
        assert!((got - want).abs() < 1e-5, "({oy},{ox},{o}): {got} vs {want}");
    }
}

#[test]
fn first_decoder_upsampling_extent() {
    let mut rng = Rng::new(6);
    let x: Tensor<f32> = Tensor::uniform(unet_core::Shape::new(&[1, 32, 32, 512]).unwrap(), -1.0, 1.0, &mut rng);
    let p = TransposeConvParams::<f32>::he(512, 256, &mut rng).unwrap();
    let (y, _) = conv2d_transpose_forward(&x, &p).unwrap();
    assert_eq!(y.dims(), &[1, 64, 64, 256]);
}

#[test]
fn convolution_is_thread_count_invariant() {
    let mut rng = Rng::new(8);
    let x: Tensor<f32> = Tensor::uniform(unet_core::Shape::new(&[2, 16, 16, 3]).unwrap(), -1.0, 1.0, &mut rng);
    let p = ConvParams::<f32>::he(3, 8, &mut rng).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let (y, tape) = conv2d_forward(&x, &p).unwrap();
                let g = conv2d_backward(&y, &tape, &p).unwrap();
                (y, g.kernel, g.input)
            })
    };
    assert_eq!(run(1), run(4));
}
