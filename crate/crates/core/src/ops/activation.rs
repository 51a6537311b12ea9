use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
        }
    }

    /// Derivative expressed through the forward output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub fn apply_in_place<T: Real>(self, t: &mut Tensor<T>) {
        t.data_mut().iter_mut().for_each(|v| *v = self.apply(*v));
    }

    /// `grad *= f'(x)`, given the cached forward output.
    pub fn backward_in_place<T: Real>(self, grad: &mut Tensor<T>, output: &Tensor<T>) {
        for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
            *g = *g * self.derivative_from_output(y);
        }
    }
}

pub fn activation<T: Real>(input: &Tensor<T>, kind: Activation) -> Tensor<T> {
    input.map(|v| kind.apply(v))
}

/// Gradient with respect to the activation input, using the cached output.
pub fn activation_backward<T: Real>(
    grad_out: &Tensor<T>,
    output: &Tensor<T>,
    kind: Activation,
) -> Result<Tensor<T>> {
    if grad_out.shape() != output.shape() {
        return Err(Error::Shape(format!(
            "activation_backward: grad {:?} vs output {:?}",
            grad_out.shape(),
            output.shape()
        )));
    }
    let mut g = grad_out.clone();
    kind.backward_in_place(&mut g, output);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        assert_eq!(Activation::Relu.apply(-1.0f64), 0.0);
        assert_eq!(Activation::Relu.apply(2.0f64), 2.0);
    }

    #[test]
    fn sigmoid_at_zero() {
        let y = Activation::Sigmoid.apply(0.0f64);
        assert_eq!(y, 0.5);
        assert_eq!(Activation::Sigmoid.derivative_from_output(y), 0.25);
    }

    #[test]
    fn sigmoid_is_finite_at_extremes() {
        for x in [-1000.0f32, -50.0, 50.0, 1000.0] {
            let y = Activation::Sigmoid.apply(x);
            assert!(y.is_finite() && (0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn backward_shape_mismatch() {
        let a = Tensor::<f32>::zeros(&[1, 2, 2]);
        let b = Tensor::<f32>::zeros(&[1, 2, 3]);
        assert!(activation_backward(&a, &b, Activation::Relu).is_err());
    }
}
