use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct LossOutput<T> {
    /// `1/(2N) · Σ_k ‖x_k − y_k‖²`, accumulated in double precision.
    pub value: f64,
    /// `∂loss/∂y_k = (y_k − x_k) / N`, one per batch item.
    pub grads: Vec<Tensor<T>>,
}

/// Mini-batch Euclidean reconstruction loss between the input stacks and
/// their reconstructions.
pub fn euclidean_loss<T, A, B>(batch_in: &[A], batch_out: &[B]) -> Result<LossOutput<T>>
where
    T: Real,
    A: AsRef<Tensor<T>>,
    B: AsRef<Tensor<T>>,
{
    if batch_in.is_empty() {
        return Err(Error::Argument("euclidean_loss: empty batch".into()));
    }
    if batch_in.len() != batch_out.len() {
        return Err(Error::Argument(format!(
            "euclidean_loss: {} inputs but {} outputs",
            batch_in.len(),
            batch_out.len()
        )));
    }
    let n = batch_in.len();
    let inv_n = T::of(1.0 / n as f64);
    let mut total = 0.0f64;
    let mut grads = Vec::with_capacity(n);
    for (k, (x, y)) in batch_in.iter().zip(batch_out).enumerate() {
        let (x, y) = (x.as_ref(), y.as_ref());
        if x.shape() != y.shape() {
            return Err(Error::Shape(format!(
                "euclidean_loss: item {k} input {:?} vs output {:?}",
                x.shape(),
                y.shape()
            )));
        }
        let mut g = Tensor::zeros(y.shape());
        let mut sq = 0.0f64;
        for ((gv, &xv), &yv) in g.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
            let d = yv - xv;
            let df = d.to_f64_lossy();
            sq += df * df;
            *gv = d * inv_n;
        }
        total += sq;
        grads.push(g);
    }
    Ok(LossOutput {
        value: total / (2.0 * n as f64),
        grads,
    })
}

impl<T> AsRef<Tensor<T>> for Tensor<T> {
    fn as_ref(&self) -> &Tensor<T> {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let x = Tensor::full(&[5, 4, 4], 0.3f32);
        let l = euclidean_loss(&[x.clone()], &[x]).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grads[0].data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_pixel_unit_difference() {
        let x = Tensor::<f64>::zeros(&[5, 2, 2]);
        let mut y = x.clone();
        y.data_mut()[7] = 1.0;
        let l = euclidean_loss(&[x], &[y]).unwrap();
        assert_eq!(l.value, 0.5);
        assert_eq!(l.grads[0].data()[7], 1.0);
    }

    #[test]
    fn duplicating_items_keeps_mean() {
        let x = Tensor::from_vec(&[1, 1, 3], vec![0.0f64, 0.5, 1.0]).unwrap();
        let y = Tensor::from_vec(&[1, 1, 3], vec![0.25f64, 0.5, 0.0]).unwrap();
        let one = euclidean_loss(&[x.clone()], &[y.clone()]).unwrap().value;
        let two = euclidean_loss(&[x.clone(), x], &[y.clone(), y]).unwrap().value;
        assert_eq!(one, two);
    }

    #[test]
    fn empty_batch_is_argument_error() {
        let none: [Tensor<f32>; 0] = [];
        assert!(matches!(euclidean_loss(&none, &none), Err(Error::Argument(_))));
    }

    #[test]
    fn mismatched_shapes() {
        let a = Tensor::<f32>::zeros(&[1, 2, 2]);
        let b = Tensor::<f32>::zeros(&[1, 2, 3]);
        assert!(euclidean_loss(&[a], &[b]).is_err());
    }
}
