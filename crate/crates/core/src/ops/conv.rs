use rayon::prelude::*;

use super::{axpy, dot};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Spatial extent of every learned filter.
pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// 3×3 filters `(out_channels, in_channels, 3, 3)` plus one bias per output
/// channel. Used for both convolution and transposed convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> FilterBank<T> {
    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[out_channels, in_channels, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn from_tensors(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match *weights.shape() {
            [o, _, KERNEL, KERNEL] if bias.shape() == [o] => Ok(Self { weights, bias }),
            _ => Err(Error::Shape(format!(
                "filter bank needs (O, I, 3, 3) weights and (O) bias, got {:?} and {:?}",
                weights.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    /// The nine taps of filter `(o, c)`, row-major.
    #[inline]
    pub fn taps(&self, o: usize, c: usize) -> &[T] {
        let start = (o * self.in_channels() + c) * TAPS;
        &self.weights.data()[start..start + TAPS]
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Real>(&self) -> FilterBank<U> {
        FilterBank {
            weights: self.weights.cast(),
            bias: self.bias.cast(),
        }
    }

    pub fn add_assign(&mut self, other: &FilterBank<T>) -> Result<()> {
        self.weights.add_assign(&other.weights)?;
        self.bias.add_assign(&other.bias)
    }
}

fn check_input<T: Real>(input: &Tensor<T>, filters: &FilterBank<T>, what: &str) -> Result<(usize, usize, usize)> {
    let (c, h, w) = input.expect_rank3(what)?;
    if c != filters.in_channels() {
        return Err(Error::Shape(format!(
            "{what}: input has {c} channels, filters expect {}",
            filters.in_channels()
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::Shape(format!("{what}: empty spatial extent {h}x{w}")));
    }
    Ok((c, h, w))
}

/// 3×3 cross-correlation with stride 1 and one pixel of zero padding, so the
/// output keeps the input's spatial extent.
pub fn conv2d<T: Real>(input: &Tensor<T>, filters: &FilterBank<T>) -> Result<Tensor<T>> {
    let (cin, h, w) = check_input(input, filters, "conv2d")?;
    let cout = filters.out_channels();
    let mut out = Tensor::zeros(&[cout, h, w]);
    let plane = h * w;
    if plane == 0 || cout == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(o, dst)| {
            dst.fill(filters.bias.data()[o]);
            for y in 0..h {
                let orow = &mut dst[y * w..(y + 1) * w];
                for c in 0..cin {
                    let src = input.plane(c);
                    let k = filters.taps(o, c);
                    for ky in 0..KERNEL {
                        let Some(iy) = (y + ky).checked_sub(1).filter(|&iy| iy < h) else {
                            continue;
                        };
                        let irow = &src[iy * w..(iy + 1) * w];
                        axpy(&mut orow[1..], k[ky * 3], &irow[..w - 1]);
                        axpy(orow, k[ky * 3 + 1], irow);
                        axpy(&mut orow[..w - 1], k[ky * 3 + 2], &irow[1..]);
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to its input and its filters.
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    filters: &FilterBank<T>,
) -> Result<(Tensor<T>, FilterBank<T>)> {
    let (cin, h, w) = check_input(cached_input, filters, "conv2d_backward")?;
    let cout = filters.out_channels();
    if grad_out.shape() != [cout, h, w] {
        return Err(Error::Shape(format!(
            "conv2d_backward: grad_out {:?} does not match output shape {:?}",
            grad_out.shape(),
            [cout, h, w]
        )));
    }
    let plane = h * w;

    let mut grad_in = Tensor::zeros(&[cin, h, w]);
    grad_in
        .data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(c, dst)| {
            for iy in 0..h {
                let drow = &mut dst[iy * w..(iy + 1) * w];
                for o in 0..cout {
                    let g = grad_out.plane(o);
                    let k = filters.taps(o, c);
                    for ky in 0..KERNEL {
                        // output row y reads input row y + ky - 1
                        let Some(y) = (iy + 1).checked_sub(ky).filter(|&y| y < h) else {
                            continue;
                        };
                        let grow = &g[y * w..(y + 1) * w];
                        axpy(&mut drow[..w - 1], k[ky * 3], &grow[1..]);
                        axpy(drow, k[ky * 3 + 1], grow);
                        axpy(&mut drow[1..], k[ky * 3 + 2], &grow[..w - 1]);
                    }
                }
            }
        });

    let mut grad_f = FilterBank::zeros(cout, cin);
    let bias_grad: Vec<T> = (0..cout).map(|o| grad_out.plane(o).iter().copied().sum()).collect();
    grad_f.bias.data_mut().copy_from_slice(&bias_grad);
    grad_f
        .weights
        .data_mut()
        .par_chunks_mut(cin * TAPS)
        .enumerate()
        .for_each(|(o, dst)| {
            let g = grad_out.plane(o);
            for c in 0..cin {
                let src = cached_input.plane(c);
                let taps = &mut dst[c * TAPS..(c + 1) * TAPS];
                for ky in 0..KERNEL {
                    let mut acc = [T::zero(); 3];
                    for y in 0..h {
                        let Some(iy) = (y + ky).checked_sub(1).filter(|&iy| iy < h) else {
                            continue;
                        };
                        let grow = &g[y * w..(y + 1) * w];
                        let irow = &src[iy * w..(iy + 1) * w];
                        acc[0] = acc[0] + dot(&grow[1..], &irow[..w - 1]);
                        acc[1] = acc[1] + dot(grow, irow);
                        acc[2] = acc[2] + dot(&grow[..w - 1], &irow[1..]);
                    }
                    taps[ky * 3..ky * 3 + 3].copy_from_slice(&acc);
                }
            }
        });
    Ok((grad_in, grad_f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(out: usize, inp: usize, w: Vec<f64>) -> FilterBank<f64> {
        FilterBank::from_tensors(
            Tensor::from_vec(&[out, inp, 3, 3], w).unwrap(),
            Tensor::zeros(&[out]),
        )
        .unwrap()
    }

    fn delta() -> FilterBank<f64> {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        bank(1, 1, w)
    }

    #[test]
    fn ones_on_ones_counts_neighbours() {
        let x = Tensor::full(&[1, 3, 3], 1.0);
        let y = conv2d(&x, &bank(1, 1, vec![1.0; 9])).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn delta_filter_is_identity() {
        let x = Tensor::from_vec(&[1, 2, 3], vec![1.0, -2.0, 3.5, 0.25, 9.0, -7.0]).unwrap();
        assert_eq!(conv2d(&x, &delta()).unwrap(), x);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let x = Tensor::zeros(&[2, 5, 4]);
        let f = bank(3, 2, (0..54).map(|i| i as f64 * 0.1 - 2.0).collect());
        assert!(conv2d(&x, &f).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_is_added_everywhere() {
        let x = Tensor::zeros(&[1, 2, 2]);
        let mut f = bank(1, 1, vec![0.0; 9]);
        f.bias.data_mut()[0] = 0.75;
        assert!(conv2d(&x, &f).unwrap().data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let x = Tensor::<f64>::zeros(&[2, 4, 4]);
        assert!(matches!(conv2d(&x, &delta()), Err(Error::Shape(_))));
    }

    #[test]
    fn single_pixel_width_is_supported() {
        let x = Tensor::from_vec(&[1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let y = conv2d(&x, &bank(1, 1, vec![1.0; 9])).unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let x = Tensor::from_vec(&[1, 3, 3], (0..9).map(f64::from).collect()).unwrap();
        let f = bank(2, 1, (0..18).map(f64::from).collect());
        let (gi, gf) = conv2d_backward(&Tensor::zeros(&[2, 3, 3]), &x, &f).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(gf.weights.data().iter().all(|&v| v == 0.0));
        assert!(gf.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_filter_passes_gradient_through() {
        let x = Tensor::zeros(&[1, 3, 4]);
        let g = Tensor::from_vec(&[1, 3, 4], (0..12).map(|i| i as f64 - 5.5).collect()).unwrap();
        let (gi, _) = conv2d_backward(&g, &x, &delta()).unwrap();
        assert_eq!(gi, g);
    }

    #[test]
    fn backward_rejects_wrong_grad_shape() {
        let x = Tensor::<f64>::zeros(&[1, 3, 3]);
        assert!(conv2d_backward(&Tensor::zeros(&[1, 2, 3]), &x, &delta()).is_err());
    }
}
