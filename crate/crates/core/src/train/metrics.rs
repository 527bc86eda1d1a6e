//! Classification metrics: confusion matrix, macro precision/recall/F1 and
//! macro one-vs-rest ROC AUC.
//!
//! Macro averages skip absent classes: for precision/recall/F1 a class that
//! is neither true nor predicted anywhere, for AUC a class without both
//! positives and negatives.

use std::fmt;

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(shape_err!("{} counts for a {classes}x{classes} matrix", counts.len()));
        }
        Ok(Self { classes, counts })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(shape_err!("{} labels but {} predictions", truth.len(), predicted.len()));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::Metric(format!("class pair ({truth}, {predicted}) outside 0..{}", self.classes)));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, c)).sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Metric("accuracy of an empty confusion matrix".into())),
            n => Ok(self.trace() as f64 / n as f64),
        }
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "true\\pred")?;
        for p in 0..self.classes {
            write!(f, " {p:>7}")?;
        }
        for t in 0..self.classes {
            writeln!(f)?;
            write!(f, "{t:>9}")?;
            for p in 0..self.classes {
                write!(f, " {:>7}", self.get(t, p))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class this is.
    pub support: u64,
}

/// Per-class precision/recall/F1 with `0/0 -> 0`; `None` for absent classes.
pub fn per_class_scores(cm: &ConfusionMatrix) -> Vec<Option<ClassScores>> {
    (0..cm.classes())
        .map(|c| {
            let (tp, row, col) = (cm.get(c, c), cm.row_sum(c), cm.col_sum(c));
            if row == 0 && col == 0 {
                return None;
            }
            let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let precision = ratio(tp, col);
            let recall = ratio(tp, row);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            Some(ClassScores { precision, recall, f1, support: row })
        })
        .collect()
}

/// Unweighted means of per-class precision, recall and F1.
pub fn macro_precision_recall_f1(cm: &ConfusionMatrix) -> Result<(f64, f64, f64)> {
    if cm.total() == 0 {
        return Err(Error::Metric("precision/recall of an empty confusion matrix".into()));
    }
    let present: Vec<ClassScores> = per_class_scores(cm).into_iter().flatten().collect();
    let n = present.len() as f64;
    let mean = |f: fn(&ClassScores) -> f64| present.iter().map(f).sum::<f64>() / n;
    Ok((mean(|s| s.precision), mean(|s| s.recall), mean(|s| s.f1)))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via average ranks. `None` without both classes present.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += avg * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// One-vs-rest AUC for every class of an `[n, classes]` score matrix.
pub fn ovr_auc_per_class(scores: &[f64], classes: usize, labels: &[usize]) -> Result<Vec<Option<f64>>> {
    if classes == 0 || scores.len() != labels.len() * classes {
        return Err(shape_err!("{} scores for {} labels x {classes} classes", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Metric(format!("label {bad} outside 0..{classes}")));
    }
    Ok((0..classes)
        .map(|c| {
            let col: Vec<f64> = scores.chunks_exact(classes).map(|r| r[c]).collect();
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            binary_auc(&col, &pos)
        })
        .collect())
}

/// Macro one-vs-rest AUC over the classes that have both positives and negatives.
pub fn macro_ovr_auc<T: Scalar>(scores: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let (_, classes) = scores.shape().matrix()?;
    let flat: Vec<f64> = scores.data().iter().map(|v| v.as_f64()).collect();
    macro_auc_from_slice(&flat, classes, labels)
}

pub fn macro_auc_from_slice(scores: &[f64], classes: usize, labels: &[usize]) -> Result<f64> {
    let aucs: Vec<f64> = ovr_auc_per_class(scores, classes, labels)?.into_iter().flatten().collect();
    if aucs.is_empty() {
        return Err(Error::Metric("no class has both positive and negative samples".into()));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// The six numbers reported per split and epoch. All but `loss` are
/// fractions in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsRow {
    pub loss: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsRow {
    pub const COLUMNS: [&'static str; 6] = ["loss", "accuracy", "auc", "precision", "recall", "f1"];

    pub fn values(&self) -> [f64; 6] {
        [self.loss, self.accuracy, self.auc, self.precision, self.recall, self.f1]
    }

    pub fn from_values(v: [f64; 6]) -> Self {
        Self { loss: v[0], accuracy: v[1], auc: v[2], precision: v[3], recall: v[4], f1: v[5] }
    }

    /// Combines a loss with the count- and score-based metrics.
    pub fn compute(loss: f64, cm: &ConfusionMatrix, scores: &[f64], labels: &[usize]) -> Result<Self> {
        let (precision, recall, f1) = macro_precision_recall_f1(cm)?;
        Ok(Self {
            loss,
            accuracy: cm.accuracy()?,
            auc: macro_auc_from_slice(scores, cm.classes(), labels)?,
            precision,
            recall,
            f1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let truth = [0, 1, 2, 3, 4, 0, 1];
        let cm = ConfusionMatrix::from_predictions(5, &truth, &truth).unwrap();
        assert_eq!(cm.accuracy().unwrap(), 1.0);
        assert_eq!(macro_precision_recall_f1(&cm).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_present_classes() {
        let mut counts = vec![0; 25];
        counts[0] = 5; // (0,0)
        counts[1] = 5; // (0,1)
        counts[6] = 10; // (1,1)
        let cm = ConfusionMatrix::from_counts(5, counts).unwrap();
        let (p, r, f) = macro_precision_recall_f1(&cm).unwrap();
        assert!((p - (1.0 + 10.0 / 15.0) / 2.0).abs() < 1e-12);
        assert!((r - (0.5 + 1.0) / 2.0).abs() < 1e-12);
        let f0 = 2.0 * 1.0 * 0.5 / 1.5;
        let f1 = 2.0 * (10.0 / 15.0) / (10.0 / 15.0 + 1.0);
        assert!((f - (f0 + f1) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn predicted_but_never_true_class_counts_as_zero() {
        let cm = ConfusionMatrix::from_predictions(5, &[0, 0], &[0, 1]).unwrap();
        let (p, r, _) = macro_precision_recall_f1(&cm).unwrap();
        assert_eq!(p, (1.0 + 0.0) / 2.0);
        assert_eq!(r, (0.5 + 0.0) / 2.0);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(macro_precision_recall_f1(&ConfusionMatrix::new(5)).is_err());
        assert!(ConfusionMatrix::new(5).accuracy().is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.2, 0.2, 0.2, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn auc_extremes() {
        let labels = [0, 0, 1, 1];
        let separated = [0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9];
        assert_eq!(macro_auc_from_slice(&separated, 2, &labels).unwrap(), 1.0);
        let flat = [0.5; 8];
        assert_eq!(macro_auc_from_slice(&flat, 2, &labels).unwrap(), 0.5);
        assert!(macro_auc_from_slice(&[0.5, 0.5], 2, &[0]).is_err());
    }
}
