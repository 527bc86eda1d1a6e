use crate::error::{shape_err, Result};
use crate::tensor::Tensor;
use crate::Scalar;

/// Which inputs were strictly positive.
#[derive(Clone, Debug)]
pub struct ReluTape {
    active: Vec<bool>,
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, ReluTape) {
    let active = x.data().iter().map(|&v| v > T::zero()).collect();
    (x.max_scalar(T::zero()), ReluTape { active })
}

/// Applies ReLU in place and returns the tape.
pub(crate) fn relu_in_place<T: Scalar>(x: &mut Tensor<T>) -> ReluTape {
    let mut active = Vec::with_capacity(x.len());
    for v in x.data_mut() {
        let on = *v > T::zero();
        if !on {
            *v = T::zero();
        }
        active.push(on);
    }
    ReluTape { active }
}

/// Passes gradient where the input was `> 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward<T: Scalar>(grad_y: &Tensor<T>, tape: &ReluTape) -> Result<Tensor<T>> {
    let mut g = grad_y.clone();
    relu_backward_in_place(&mut g, tape)?;
    Ok(g)
}

pub(crate) fn relu_backward_in_place<T: Scalar>(grad: &mut Tensor<T>, tape: &ReluTape) -> Result<()> {
    if grad.len() != tape.active.len() {
        return Err(shape_err!(
            "relu_backward: gradient has {} elements, tape {}",
            grad.len(),
            tape.active.len()
        ));
    }
    for (g, &on) in grad.data_mut().iter_mut().zip(&tape.active) {
        if !on {
            *g = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_subgradient() {
        let x = Tensor::from_vec(&[3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        let (y, tape) = relu(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::from_vec(&[3], vec![1.0f32; 3]).unwrap();
        assert_eq!(relu_backward(&g, &tape).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn finite_differences_away_from_kink() {
        let xs = [-2.0f64, -0.5, -0.11, 0.12, 0.7, 3.0];
        let x = Tensor::from_vec(&[xs.len()], xs.to_vec()).unwrap();
        let (_, tape) = relu(&x);
        let ones = Tensor::from_vec(&[xs.len()], vec![1.0; xs.len()]).unwrap();
        let g = relu_backward(&ones, &tape).unwrap();
        let h = 1e-4;
        for (i, &v) in xs.iter().enumerate() {
            let fd = ((v + h).max(0.0) - (v - h).max(0.0)) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() <= 1e-4);
        }
    }

    #[test]
    fn tape_length_guard() {
        let (_, tape) = relu(&Tensor::from_vec(&[2], vec![1.0f32, 2.0]).unwrap());
        let g = Tensor::from_vec(&[3], vec![1.0f32; 3]).unwrap();
        assert!(relu_backward(&g, &tape).is_err());
    }
}
