use std::fmt;
use std::str::FromStr;

use crate::error::{shape_err, Error, Result};
use crate::model::ParamRegistry;
use crate::tensor::Tensor;
use crate::Scalar;

/// Applies one update to every parameter given matching gradients.
pub trait Optimizer<T: Scalar>: Send {
    fn step(&mut self, params: &mut [(&str, &mut Tensor<T>)], grads: &ParamRegistry<T>) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{other}' (expected sgd or adam)"))),
        }
    }
}

/// Rejects gradient registries that do not line up with the parameters, and
/// non-finite gradient values.
fn check<T: Scalar>(params: &[(&str, &mut Tensor<T>)], grads: &ParamRegistry<T>) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape_err!("{} parameters but {} gradients", params.len(), grads.len()));
    }
    for ((name, p), (gname, g)) in params.iter().zip(grads) {
        if name != gname {
            return Err(shape_err!("gradient {gname} where {name} was expected"));
        }
        if p.dims() != g.dims() {
            return Err(shape_err!("gradient of {name} is {}, parameter is {}", g.shape(), p.shape()));
        }
        if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient in {name} at element {pos}: {}", g.data()[pos])));
        }
    }
    Ok(())
}

/// `p <- p - lr * g`
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl<T: Scalar> Optimizer<T> for Sgd {
    fn step(&mut self, params: &mut [(&str, &mut Tensor<T>)], grads: &ParamRegistry<T>) -> Result<()> {
        check(params, grads)?;
        let lr = T::of(self.lr);
        for ((_, p), g) in params.iter_mut().zip(grads.values()) {
            for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= lr * gv;
            }
        }
        Ok(())
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, step: 0, moments: Vec::new() }
    }

    pub fn with_lr(lr: f64) -> Self {
        Self::new(lr, 0.9, 0.999, 1e-8)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &mut [(&str, &mut Tensor<T>)], grads: &ParamRegistry<T>) -> Result<()> {
        check(params, grads)?;
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|(_, p)| (vec![T::zero(); p.len()], vec![T::zero(); p.len()]))
                .collect();
        } else if self.moments.len() != params.len() {
            return Err(shape_err!("optimizer state holds {} tensors, model has {}", self.moments.len(), params.len()));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - self.beta1.powi(t));
        let c2 = T::of(1.0 - self.beta2.powi(t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        let one = T::one();
        for (((_, p), g), (m, v)) in params.iter_mut().zip(grads.values()).zip(&mut self.moments) {
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(name: &str, v: f64) -> ParamRegistry<f64> {
        let mut r = ParamRegistry::new();
        r.insert(name.to_string(), Tensor::from_vec(&[1], vec![v]).unwrap());
        r
    }

    #[test]
    fn sgd_step() {
        let mut p = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let mut view = [("w", &mut p)];
        Sgd { lr: 0.1 }.step(&mut view, &registry("w", 0.5)).unwrap();
        assert!((p.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [0.5, 3.0, 1e-3] {
            let mut p = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
            let mut view = [("w", &mut p)];
            let mut adam = Adam::with_lr(1e-3);
            adam.step(&mut view, &registry("w", g)).unwrap();
            // m_hat = g, v_hat = g^2 after bias correction.
            let want = 1.0 - 1e-3 * g / (g + 1e-8);
            assert!((p.data()[0] - want).abs() < 1e-12, "g={g}");
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Tensor::from_vec(&[1], vec![0.25f64]).unwrap();
        let mut view = [("w", &mut p)];
        Adam::with_lr(1e-3).step(&mut view, &registry("w", 0.0)).unwrap();
        Sgd { lr: 0.1 }.step(&mut view, &registry("w", 0.0)).unwrap();
        assert_eq!(p.data()[0], 0.25);
    }

    #[test]
    fn mismatches_and_nan_rejected() {
        let mut p = Tensor::from_vec(&[1], vec![0.25f64]).unwrap();
        let mut view = [("w", &mut p)];
        assert!(Sgd { lr: 0.1 }.step(&mut view, &registry("b", 1.0)).is_err());
        let err = Sgd { lr: 0.1 }.step(&mut view, &registry("w", f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
