use crate::error::{shape_err, Result};
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b, Rng, Shape, Tensor};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T> {
    /// `[n_in, n_out]`
    pub weight: Tensor<T>,
    /// `[n_out]`
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = Self { weight, bias };
        p.geometry()?;
        Ok(p)
    }

    pub fn he(n_in: usize, n_out: usize, rng: &mut Rng) -> Result<Self> {
        let weight = Tensor::he_init(Shape::new(&[n_in, n_out])?, n_in, rng)?;
        Self::new(weight, Tensor::zeros(Shape::new(&[n_out])?))
    }

    /// `(n_in, n_out)`
    pub fn geometry(&self) -> Result<(usize, usize)> {
        let (ni, no) = self.weight.shape().matrix()?;
        if self.bias.dims() != [no] {
            return Err(shape_err!("dense bias {} does not match {no} outputs", self.bias.shape()));
        }
        Ok((ni, no))
    }
}

#[derive(Clone, Debug)]
pub struct DenseTape<T> {
    input: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `y = x·W + bias` row by row.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, p: &DenseParams<T>) -> Result<(Tensor<T>, DenseTape<T>)> {
    let (ni, _) = p.geometry()?;
    let (_, xi) = x.shape().matrix()?;
    if xi != ni {
        return Err(shape_err!("dense: input has {xi} features, weight expects {ni}"));
    }
    let mut y = matmul(x, &p.weight)?;
    let bias = p.bias.data();
    for row in y.data_mut().chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok((y, DenseTape { input: x.clone() }))
}

pub fn dense_backward<T: Scalar>(grad_y: &Tensor<T>, tape: &DenseTape<T>, p: &DenseParams<T>) -> Result<DenseGrads<T>> {
    let (_, no) = p.geometry()?;
    let (b, _) = tape.input.shape().matrix()?;
    if grad_y.dims() != [b, no] {
        return Err(shape_err!("dense_backward: grad {} does not match output [{b},{no}]", grad_y.shape()));
    }
    let mut grad_bias = vec![T::zero(); no];
    for row in grad_y.data().chunks_exact(no) {
        for (a, &g) in grad_bias.iter_mut().zip(row) {
            *a += g;
        }
    }
    Ok(DenseGrads {
        input: matmul_a_bt(grad_y, &p.weight)?,
        weight: matmul_at_b(&tape.input, grad_y)?,
        bias: Tensor::from_vec(&[no], grad_bias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_arithmetic() {
        let id = Tensor::from_vec(&[2, 2], vec![1.0f32, 0., 0., 1.]).unwrap();
        let p = DenseParams::new(id, Tensor::zeros(Shape::new(&[2]).unwrap())).unwrap();
        let x = Tensor::from_vec(&[2, 2], vec![0.5f32, -1., 2., 3.]).unwrap();
        assert_eq!(dense_forward(&x, &p).unwrap().0, x);

        let w = Tensor::from_vec(&[2, 1], vec![1.0f32, 2.]).unwrap();
        let p = DenseParams::new(w, Tensor::from_vec(&[1], vec![3.0]).unwrap()).unwrap();
        let x = Tensor::from_vec(&[1, 2], vec![1.0f32, 1.]).unwrap();
        assert_eq!(dense_forward(&x, &p).unwrap().0.data(), &[6.0]);
    }

    #[test]
    fn batch_gradients_are_sums_of_row_gradients() {
        let mut rng = Rng::new(9);
        let p = DenseParams::<f64>::he(3, 4, &mut rng).unwrap();
        let x = Tensor::uniform(Shape::new(&[2, 3]).unwrap(), -1.0, 1.0, &mut rng);
        let g = Tensor::uniform(Shape::new(&[2, 4]).unwrap(), -1.0, 1.0, &mut rng);
        let (_, tape) = dense_forward(&x, &p).unwrap();
        let full = dense_backward(&g, &tape, &p).unwrap();

        let mut w_sum = Tensor::<f64>::zeros(Shape::new(&[3, 4]).unwrap());
        let mut b_sum = Tensor::<f64>::zeros(Shape::new(&[4]).unwrap());
        for r in 0..2 {
            let xr = x.batch_slice(r, 1).unwrap();
            let gr = g.batch_slice(r, 1).unwrap();
            let (_, t) = dense_forward(&xr, &p).unwrap();
            let gr = dense_backward(&gr, &t, &p).unwrap();
            w_sum.add_assign(&gr.weight).unwrap();
            b_sum.add_assign(&gr.bias).unwrap();
        }
        for (a, b) in full.weight.data().iter().zip(w_sum.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in full.bias.data().iter().zip(b_sum.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = Rng::new(10);
        let p = DenseParams::<f32>::he(3, 2, &mut rng).unwrap();
        let x = Tensor::uniform(Shape::new(&[4, 3]).unwrap(), -1.0, 1.0, &mut rng);
        let (y, tape) = dense_forward(&x, &p).unwrap();
        let g = dense_backward(&Tensor::zeros(y.shape().clone()), &tape, &p).unwrap();
        assert!(g.input.data().iter().chain(g.weight.data()).chain(g.bias.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = Rng::new(11);
        let p = DenseParams::<f32>::he(3, 2, &mut rng).unwrap();
        let x = Tensor::<f32>::filled(&[1, 4], 1.0).unwrap();
        assert!(dense_forward(&x, &p).is_err());
    }
}
