use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct CrossEntropy<T> {
    /// Batch mean of `-ln p[label]`, accumulated in `f64`.
    pub loss: f64,
    pub probs: Tensor<T>,
    /// `(probs - onehot) / batch`
    pub grad_logits: Tensor<T>,
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, c) = logits.shape().matrix()?;
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_exact_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(probs)
}

pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<CrossEntropy<T>> {
    let (b, c) = logits.shape().matrix()?;
    if labels.len() != b {
        return Err(shape_err!("softmax_cross_entropy: {} labels for batch of {b}", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Data(format!("label {bad} outside 0..{c}")));
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0f64;
    let inv_b = T::of(1.0 / b as f64);
    let mut grad = probs.clone();
    for ((lrow, grow), &label) in logits
        .data()
        .chunks_exact(c)
        .zip(grad.data_mut().chunks_exact_mut(c))
        .zip(labels)
    {
        // -ln softmax = logsumexp - logit, computed from logits for accuracy
        // when the true-class probability underflows.
        let max = lrow.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lrow.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln();
        loss += lse - lrow[label].as_f64();
        grow[label] -= T::one();
        for g in grow.iter_mut() {
            *g *= inv_b;
        }
    }
    Ok(CrossEntropy { loss: loss / b as f64, probs, grad_logits: grad })
}
