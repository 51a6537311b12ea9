//! Adaptive-moment optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new() -> Self {
        Self {
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

/// Applies one update to every parameter from the gradient stored in its
/// `grad` buffer. Parameters without a gradient buffer are treated as having
/// zero gradient.
///
/// Nothing is modified if any gradient is non-finite.
pub fn adam_step<'a, T, I>(params: I, state: &mut AdamState<T>, cfg: &AdamConfig) -> Result<()>
where
    T: Real,
    I: IntoIterator<Item = &'a mut Tensor<T>>,
{
    let mut params: Vec<&mut Tensor<T>> = params.into_iter().collect();
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len()
        || params.iter().zip(&state.m).any(|(p, m)| p.len() != m.len())
    {
        return Err(Error::Shape(
            "adam_step: optimizer state does not match the parameter set".into(),
        ));
    }
    for (i, p) in params.iter().enumerate() {
        if let Some(g) = p.grad() {
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Training {
                    step: state.step as usize,
                    message: format!("non-finite gradient in parameter tensor {i} at element {j}"),
                    last_checkpoint: None,
                });
            }
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let lr = T::of(cfg.lr);
    let eps = T::of(cfg.eps);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let (data, grad) = p.data_and_grad_mut();
        for (((w, &g), mi), vi) in data.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (T::one() - b1) * g;
            *vi = b2 * *vi + (T::one() - b2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f32], grad: &[f32]) -> Tensor<f32> {
        let mut t = Tensor::from_vec(&[values.len()], values.to_vec()).unwrap();
        t.grad_or_zeros().copy_from_slice(grad);
        t
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = param(&[0.5, -1.0], &[0.0, 0.0]);
        let mut st = AdamState::new();
        adam_step([&mut p], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p.data(), &[0.5, -1.0]);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut p = param(&[0.0, 0.0], &[2.0, -3.0]);
        let mut st = AdamState::new();
        for _ in 0..100 {
            adam_step([&mut p], &mut st, &AdamConfig::default()).unwrap();
        }
        assert!(p.data()[0] < 0.0);
        assert!(p.data()[1] > 0.0);
        // bias-corrected first step moves by exactly lr per coordinate
        let mut q = param(&[0.0], &[5.0]);
        let mut st = AdamState::new();
        adam_step([&mut q], &mut st, &AdamConfig::default()).unwrap();
        assert!((q.data()[0] + 1e-3).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = param(&[0.1, 0.2, 0.3], &[0.3, -0.7, 1.1]);
            let mut st = AdamState::new();
            for _ in 0..25 {
                adam_step([&mut p], &mut st, &AdamConfig::default()).unwrap();
            }
            p.into_data()
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut p = param(&[1.0, 2.0], &[0.1, f32::NAN]);
        let mut st = AdamState::new();
        let err = adam_step([&mut p], &mut st, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Training { .. }));
        assert_eq!(p.data(), &[1.0, 2.0]);
        assert_eq!(st.step, 0);
    }
}
