//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod checks;

use unet_core::tensor::Rng;
use unet_core::{Shape, Tensor};

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps near-zero gradients
/// from producing meaningless ratios.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Worst relative error of `analytic` against central differences of
/// `loss` around `base`, perturbing every coordinate.
pub fn fd_max_rel_err(base: &[f64], analytic: &[f64], h: f64, mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(base.len(), analytic.len());
    let mut x = base.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        x[i] = base[i] + h;
        let up = loss(&x);
        x[i] = base[i] - h;
        let down = loss(&x);
        x[i] = base[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * h), 1e-6));
    }
    worst
}

pub fn random(dims: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor<f64> {
    Tensor::uniform(Shape::new(dims).unwrap(), lo, hi, rng)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mann-Whitney AUC by comparing every positive against every negative.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1;
            wins += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Macro one-vs-rest AUC over classes that have positives and negatives.
pub fn pairwise_macro_auc(scores: &[f64], classes: usize, labels: &[usize]) -> Option<f64> {
    let per: Vec<f64> = (0..classes)
        .filter_map(|c| {
            let col: Vec<f64> = scores.chunks(classes).map(|r| r[c]).collect();
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            pairwise_auc(&col, &pos)
        })
        .collect();
    (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
}

/// Accuracy and macro precision/recall/F1 by counting label pairs directly.
pub fn count_oracle(classes: usize, truth: &[usize], pred: &[usize]) -> (f64, f64, f64, f64) {
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64;
    let (mut p_sum, mut r_sum, mut f_sum, mut present) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
        let actual = truth.iter().filter(|&&t| t == c).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        if actual == 0.0 && predicted == 0.0 {
            continue;
        }
        present += 1.0;
        let prec = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let rec = if actual > 0.0 { tp / actual } else { 0.0 };
        p_sum += prec;
        r_sum += rec;
        f_sum += if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
    }
    (correct / n, p_sum / present, r_sum / present, f_sum / present)
}
