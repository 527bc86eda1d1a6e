//! Matrix products.
//!
//! Every output element is accumulated sequentially over the inner index
//! `k = 0, 1, ..., K-1`, starting from zero. Work is split across threads by
//! output rows only, so results are bitwise identical for any worker count.

use rayon::prelude::*;

use super::Tensor;
use crate::error::{shape_err, Result};
use crate::Scalar;

const ROWS_PER_TASK: usize = 4;

/// `c[i, :] += a[i, k] * b[k, :]` for k in order. The inner loop runs over a
/// contiguous row of `b`, which the compiler vectorizes without reordering
/// the k-sum.
pub(crate) fn gemm_rows<T: Scalar>(a: &[T], b: &[T], c: &mut [T], k: usize, n: usize) {
    c.par_chunks_mut(n)
        .zip(a.par_chunks(k))
        .with_min_len(ROWS_PER_TASK)
        .for_each(|(c_row, a_row)| {
            for (p, &av) in a_row.iter().enumerate() {
                if av == T::zero() {
                    continue;
                }
                let b_row = &b[p * n..(p + 1) * n];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv += av * bv;
                }
            }
        });
}

/// `[m,k] x [k,n] -> [m,n]`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.shape().matrix()?;
    let (k2, n) = b.shape().matrix()?;
    if k != k2 {
        return Err(shape_err!("matmul: inner extents {k} and {k2} differ"));
    }
    let mut c = vec![T::zero(); m * n];
    gemm_rows(a.data(), b.data(), &mut c, k, n);
    Tensor::from_vec(&[m, n], c)
}

/// `aᵀ · b` for `a: [k,m]`, `b: [k,n]`, without materializing `aᵀ`.
pub fn matmul_at_b<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (k, m) = a.shape().matrix()?;
    let (k2, n) = b.shape().matrix()?;
    if k != k2 {
        return Err(shape_err!("matmul_at_b: leading extents {k} and {k2} differ"));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut c = vec![T::zero(); m * n];
    c.par_chunks_mut(n)
        .enumerate()
        .with_min_len(ROWS_PER_TASK)
        .for_each(|(i, c_row)| {
            for p in 0..k {
                let av = ad[p * m + i];
                if av == T::zero() {
                    continue;
                }
                for (cv, &bv) in c_row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                    *cv += av * bv;
                }
            }
        });
    Tensor::from_vec(&[m, n], c)
}

/// `a · bᵀ` for `a: [m,k]`, `b: [n,k]`.
pub fn matmul_a_bt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = a.shape().matrix()?;
    let (_, k2) = b.shape().matrix()?;
    if k != k2 {
        return Err(shape_err!("matmul_a_bt: inner extents {k} and {k2} differ"));
    }
    matmul(a, &b.transpose2()?)
}
