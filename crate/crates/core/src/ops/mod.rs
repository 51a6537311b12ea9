//! Differentiable kernels used by the autoencoder. Every forward operation
//! has a hand-derived backward counterpart; there is no tape.

mod activation;
mod concat;
mod conv;
mod deconv;
mod loss;
mod pool;

pub use activation::{activation, activation_backward, Activation};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv2d, conv2d_backward, FilterBank, KERNEL};
pub use deconv::{deconv2d, deconv2d_backward};
pub use loss::{euclidean_loss, LossOutput};
pub use pool::{maxpool2, maxpool2_backward, PoolIndexMap};

use crate::tensor::Real;

#[inline]
pub(crate) fn axpy<T: Real>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + a * s;
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
