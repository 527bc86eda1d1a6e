//! Gradient and metric checks reused by the acceptance suite.

use super::{count_oracle, dot, fd_max_rel_err, pairwise_macro_auc, random, rel_err};
use unet_core::model::{ModelGraph, ModelKind, UNetConfig};
use unet_core::ops::*;
use unet_core::tensor::Rng;
use unet_core::train::{argmax, macro_auc_from_slice, macro_precision_recall_f1, ConfusionMatrix};
use unet_core::{Tensor, UNet64};

pub const H: f64 = 1e-5;

fn t(dims: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(dims, data.to_vec()).unwrap()
}

pub fn conv_errors(seed: u64) -> [f64; 3] {
    let mut rng = Rng::new(seed);
    let (b, ci, co) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
    let (h, w) = (2 + rng.below(3), 2 + rng.below(3));
    let x = random(&[b, h, w, ci], -1.0, 1.0, &mut rng);
    let k = random(&[3, 3, ci, co], -1.0, 1.0, &mut rng);
    let bias = random(&[co], -1.0, 1.0, &mut rng);
    let p = ConvParams::new(k.clone(), bias.clone()).unwrap();
    let (y, tape) = conv2d_forward(&x, &p).unwrap();
    let r = random(y.dims(), -1.0, 1.0, &mut rng);
    let g = conv2d_backward(&r, &tape, &p).unwrap();
    let loss = |x: &Tensor<f64>, p: &ConvParams<f64>| dot(conv2d_forward(x, p).unwrap().0.data(), r.data());
    [
        fd_max_rel_err(x.data(), g.input.data(), H, |v| loss(&t(x.dims(), v), &p)),
        fd_max_rel_err(k.data(), g.kernel.data(), H, |v| {
            loss(&x, &ConvParams::new(t(k.dims(), v), bias.clone()).unwrap())
        }),
        fd_max_rel_err(bias.data(), g.bias.data(), H, |v| {
            loss(&x, &ConvParams::new(k.clone(), t(&[co], v)).unwrap())
        }),
    ]
}

pub fn transpose_errors(seed: u64) -> [f64; 3] {
    let mut rng = Rng::new(seed);
    let (b, ci, co) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
    let x = random(&[b, 2, 2, ci], -1.0, 1.0, &mut rng);
    let k = random(&[2, 2, co, ci], -1.0, 1.0, &mut rng);
    let bias = random(&[co], -1.0, 1.0, &mut rng);
    let p = TransposeConvParams::new(k.clone(), bias.clone()).unwrap();
    let (y, tape) = conv2d_transpose_forward(&x, &p).unwrap();
    let r = random(y.dims(), -1.0, 1.0, &mut rng);
    let g = conv2d_transpose_backward(&r, &tape, &p).unwrap();
    let loss = |x: &Tensor<f64>, p: &TransposeConvParams<f64>| {
        dot(conv2d_transpose_forward(x, p).unwrap().0.data(), r.data())
    };
    [
        fd_max_rel_err(x.data(), g.input.data(), H, |v| loss(&t(x.dims(), v), &p)),
        fd_max_rel_err(k.data(), g.kernel.data(), H, |v| {
            loss(&x, &TransposeConvParams::new(t(k.dims(), v), bias.clone()).unwrap())
        }),
        fd_max_rel_err(bias.data(), g.bias.data(), H, |v| {
            loss(&x, &TransposeConvParams::new(k.clone(), t(&[co], v)).unwrap())
        }),
    ]
}

/// Inputs are a shuffled arithmetic progression so no window holds a tie
/// within the step size.
pub fn pool_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (b, c) = (1 + rng.below(2), 1 + rng.below(3));
    let n = b * 4 * 4 * c;
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 1.0).collect();
    rng.shuffle(&mut vals);
    let x = t(&[b, 4, 4, c], &vals);
    let (y, tape) = maxpool2d_forward(&x, PoolSpec).unwrap();
    let r = random(y.dims(), -1.0, 1.0, &mut rng);
    let g = maxpool2d_backward(&r, &tape).unwrap();
    fd_max_rel_err(x.data(), g.data(), H, |v| {
        dot(maxpool2d_forward(&t(x.dims(), v), PoolSpec).unwrap().0.data(), r.data())
    })
}

pub fn dense_errors(seed: u64) -> [f64; 3] {
    let mut rng = Rng::new(seed);
    let (b, n_in, n_out) = (1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4));
    let x = random(&[b, n_in], -1.0, 1.0, &mut rng);
    let wt = random(&[n_in, n_out], -1.0, 1.0, &mut rng);
    let bias = random(&[n_out], -1.0, 1.0, &mut rng);
    let p = DenseParams::new(wt.clone(), bias.clone()).unwrap();
    let (y, tape) = dense_forward(&x, &p).unwrap();
    let r = random(y.dims(), -1.0, 1.0, &mut rng);
    let g = dense_backward(&r, &tape, &p).unwrap();
    let loss = |x: &Tensor<f64>, p: &DenseParams<f64>| dot(dense_forward(x, p).unwrap().0.data(), r.data());
    [
        fd_max_rel_err(x.data(), g.input.data(), H, |v| loss(&t(x.dims(), v), &p)),
        fd_max_rel_err(wt.data(), g.weight.data(), H, |v| {
            loss(&x, &DenseParams::new(t(wt.dims(), v), bias.clone()).unwrap())
        }),
        fd_max_rel_err(bias.data(), g.bias.data(), H, |v| {
            loss(&x, &DenseParams::new(wt.clone(), t(&[n_out], v)).unwrap())
        }),
    ]
}

/// Inputs kept at |x| >= 0.1, away from the kink.
pub fn relu_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let x = random(&[1, 3, 3, 2], 0.1, 1.0, &mut rng).map(|v| if rng_sign(v) { v } else { -v });
    let (y, tape) = relu(&x);
    let r = random(y.dims(), -1.0, 1.0, &mut rng);
    let g = relu_backward(&r, &tape).unwrap();
    fd_max_rel_err(x.data(), g.data(), H, |v| dot(relu(&t(x.dims(), v)).0.data(), r.data()))
}

// deterministic sign pattern from the value's low mantissa bits
fn rng_sign(v: f64) -> bool {
    v.to_bits() & 1 == 0
}

pub fn loss_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let b = 1 + rng.below(4);
    let logits = random(&[b, 5], -3.0, 3.0, &mut rng);
    let labels: Vec<usize> = (0..b).map(|_| rng.below(5)).collect();
    let ce = softmax_cross_entropy(&logits, &labels).unwrap();
    fd_max_rel_err(logits.data(), ce.grad_logits.data(), H, |v| {
        softmax_cross_entropy(&t(&[b, 5], v), &labels).unwrap().loss
    })
}

/// Spot check of the composed model: `samples` parameters spread over all
/// parameter tensors, returning `(worst relative error, parameters whose
/// gradient is non-zero)`.
pub fn model_spot_check(kind: ModelKind, seed: u64, samples: usize) -> (f64, usize) {
    let cfg = UNetConfig::scaled(16, 4);
    let mut model: UNet64 = ModelGraph::build(kind, &cfg, &mut Rng::new(seed)).unwrap();
    let mut rng = Rng::with_stream(seed, 99);
    let x = random(&[2, 16, 16, 1], 0.0, 1.0, &mut rng);
    let labels = [rng.below(5), rng.below(5)];
    let loss_of = |m: &UNet64| softmax_cross_entropy(&m.infer(&x).unwrap(), &labels).unwrap().loss;
    let (logits, tape) = model.forward(&x).unwrap();
    let ce = softmax_cross_entropy(&logits, &labels).unwrap();
    let grads = model.backward(tape, &ce.grad_logits).unwrap();

    let names: Vec<String> = model.parameters().map(|(n, _)| n.to_string()).collect();
    let mut worst: f64 = 0.0;
    let mut live = 0;
    for i in 0..samples {
        let name = &names[i % names.len()];
        let len = model.parameter(name).unwrap().len();
        let idx = rng.below(len);
        let analytic = grads[name.as_str()].data()[idx];
        live += usize::from(analytic.abs() > 1e-9);
        let mut eval = |delta: f64| {
            model
                .update(|ps| {
                    let (_, p) = ps.iter_mut().find(|(n, _)| n == name).unwrap();
                    p.data_mut()[idx] += delta;
                    Ok(())
                })
                .unwrap();
            loss_of(&model)
        };
        let up = eval(H);
        let down = eval(-2.0 * H);
        eval(H);
        worst = worst.max(rel_err(analytic, (up - down) / (2.0 * H), 1e-6));
    }
    (worst, live)
}


pub const K: usize = 5;

/// One random evaluation: labels, probability-like scores with frequent ties,
/// and arg-max predictions.
pub fn draw(rng: &mut Rng, n: usize) -> (Vec<usize>, Vec<f64>, Vec<usize>) {
    let labels: Vec<usize> = (0..n).map(|_| rng.below(K)).collect();
    // scores on a coarse grid so ties are common
    let scores: Vec<f64> = (0..n * K).map(|_| rng.below(8) as f64 / 8.0).collect();
    let preds: Vec<usize> = scores.chunks(K).map(argmax).collect();
    (labels, scores, preds)
}

/// Largest deviation from the oracles over `draws` random evaluations per
/// seed: `(classification metrics, auc)`.
pub fn oracle_deviation(seeds: std::ops::Range<u64>, draws: usize) -> (f64, f64) {
    let (mut cls, mut auc) = (0.0f64, 0.0f64);
    for seed in seeds {
        let mut rng = Rng::new(seed);
        for _ in 0..draws {
            let n = 2 + rng.below(60);
            let (labels, scores, preds) = draw(&mut rng, n);
            let cm = ConfusionMatrix::from_predictions(K, &labels, &preds).unwrap();
            let (acc, p, r, f) = count_oracle(K, &labels, &preds);
            let (mp, mr, mf) = macro_precision_recall_f1(&cm).unwrap();
            for (a, b) in [(cm.accuracy().unwrap(), acc), (mp, p), (mr, r), (mf, f)] {
                cls = cls.max((a - b).abs());
            }
            match (macro_auc_from_slice(&scores, K, &labels), pairwise_macro_auc(&scores, K, &labels)) {
                (Ok(a), Some(b)) => auc = auc.max((a - b).abs()),
                (Err(_), None) => {}
                (a, b) => panic!("evaluability disagrees: {a:?} vs {b:?}"),
            }
        }
    }
    (cls, auc)
}

