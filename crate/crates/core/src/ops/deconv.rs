//! Transposed 3×3 convolution with stride 2, padding 1 and output padding 1.
//!
//! Input pixel `(iy, ix)` scatters into output pixels `(2·iy + ky − 1, 2·ix + kx − 1)`,
//! so the output is exactly twice the input in each spatial dimension.
//! Viewed from the output side, even rows/columns receive only the centre
//! tap, odd ones receive taps 2 (from `m`) and 0 (from `m + 1`).

use rayon::prelude::*;

use super::conv::{FilterBank, KERNEL};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

const TAPS: usize = KERNEL * KERNEL;

/// `(input_row, kernel_row)` pairs feeding output row `oy`.
#[inline]
fn sources(oy: usize, in_h: usize) -> impl Iterator<Item = (usize, usize)> {
    let m = oy / 2;
    let pairs: [(usize, usize, bool); 2] = if oy % 2 == 0 {
        [(m, 1, true), (0, 0, false)]
    } else {
        [(m, 2, true), (m + 1, 0, m + 1 < in_h)]
    };
    pairs.into_iter().filter(|p| p.2).map(|p| (p.0, p.1))
}

/// Scatter one input row into one output row using the three taps `k`.
#[inline]
fn scatter_row<T: Real>(orow: &mut [T], irow: &[T], k: &[T]) {
    let w = irow.len();
    for (m, pair) in orow.chunks_exact_mut(2).enumerate() {
        let v = irow[m];
        pair[0] = pair[0] + k[1] * v;
        let next = if m + 1 < w { k[0] * irow[m + 1] } else { T::zero() };
        pair[1] = pair[1] + k[2] * v + next;
    }
}

fn check<T: Real>(input: &Tensor<T>, filters: &FilterBank<T>, what: &str) -> Result<(usize, usize, usize)> {
    let (c, h, w) = input.expect_rank3(what)?;
    if c != filters.in_channels() {
        return Err(Error::Shape(format!(
            "{what}: input has {c} channels, filters expect {}",
            filters.in_channels()
        )));
    }
    Ok((c, h, w))
}

/// Learnable 2× upsampling.
pub fn deconv2d<T: Real>(input: &Tensor<T>, filters: &FilterBank<T>) -> Result<Tensor<T>> {
    let (cin, h, w) = check(input, filters, "deconv2d")?;
    let cout = filters.out_channels();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(&[cout, oh, ow]);
    if oh * ow == 0 || cout == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(o, dst)| {
            dst.fill(filters.bias.data()[o]);
            for oy in 0..oh {
                let orow = &mut dst[oy * ow..(oy + 1) * ow];
                for (iy, ky) in sources(oy, h) {
                    for c in 0..cin {
                        let k = &filters.taps(o, c)[ky * 3..ky * 3 + 3];
                        let irow = &input.plane(c)[iy * w..(iy + 1) * w];
                        scatter_row(orow, irow, k);
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of [`deconv2d`] with respect to its input and its filters.
pub fn deconv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    filters: &FilterBank<T>,
) -> Result<(Tensor<T>, FilterBank<T>)> {
    let (cin, h, w) = check(cached_input, filters, "deconv2d_backward")?;
    let cout = filters.out_channels();
    let (oh, ow) = (2 * h, 2 * w);
    if grad_out.shape() != [cout, oh, ow] {
        return Err(Error::Shape(format!(
            "deconv2d_backward: grad_out {:?} does not match output shape {:?}",
            grad_out.shape(),
            [cout, oh, ow]
        )));
    }

    let mut grad_in = Tensor::zeros(&[cin, h, w]);
    if h * w > 0 {
        grad_in
            .data_mut()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(c, dst)| {
                for oy in 0..oh {
                    for (iy, ky) in sources(oy, h) {
                        let drow = &mut dst[iy * w..(iy + 1) * w];
                        for o in 0..cout {
                            let k = &filters.taps(o, c)[ky * 3..ky * 3 + 3];
                            let grow = &grad_out.plane(o)[oy * ow..(oy + 1) * ow];
                            for (ix, d) in drow.iter_mut().enumerate() {
                                let mut s = k[1] * grow[2 * ix] + k[2] * grow[2 * ix + 1];
                                if ix > 0 {
                                    s = s + k[0] * grow[2 * ix - 1];
                                }
                                *d = *d + s;
                            }
                        }
                    }
                }
            });
    }

    let mut grad_f = FilterBank::zeros(cout, cin);
    let bias_grad: Vec<T> = (0..cout).map(|o| grad_out.plane(o).iter().copied().sum()).collect();
    grad_f.bias.data_mut().copy_from_slice(&bias_grad);
    if cin > 0 {
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
                    for oy in 0..oh {
                        let grow = &g[oy * ow..(oy + 1) * ow];
                        for (iy, ky) in sources(oy, h) {
                            let irow = &src[iy * w..(iy + 1) * w];
                            let mut acc = [T::zero(); 3];
                            for (ix, &v) in irow.iter().enumerate() {
                                acc[1] = acc[1] + v * grow[2 * ix];
                                acc[2] = acc[2] + v * grow[2 * ix + 1];
                                if ix > 0 {
                                    acc[0] = acc[0] + v * grow[2 * ix - 1];
                                }
                            }
                            for kx in 0..3 {
                                taps[ky * 3 + kx] = taps[ky * 3 + kx] + acc[kx];
                            }
                        }
                    }
                }
            });
    }
    Ok((grad_in, grad_f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_bank() -> FilterBank<f64> {
        FilterBank::from_tensors(Tensor::full(&[1, 1, 3, 3], 1.0), Tensor::zeros(&[1])).unwrap()
    }

    #[test]
    fn doubles_spatial_extent() {
        let x = Tensor::<f32>::zeros(&[3, 4, 4]);
        let f = FilterBank::zeros(2, 3);
        assert_eq!(deconv2d(&x, &f).unwrap().shape(), &[2, 8, 8]);
        let x = Tensor::<f32>::zeros(&[1, 1, 3]);
        assert_eq!(deconv2d(&x, &FilterBank::zeros(1, 1)).unwrap().shape(), &[1, 2, 6]);
    }

    #[test]
    fn single_pixel_stamps_a_patch() {
        // pixel (1, 1) of a 3×3 input maps to output centre (2, 2); the 3×3
        // patch spans rows/cols 1..=3 of the 6×6 output.
        let mut x = Tensor::zeros(&[1, 3, 3]);
        x.data_mut()[4] = 1.0;
        let y = deconv2d(&x, &ones_bank()).unwrap();
        for oy in 0..6 {
            for ox in 0..6 {
                let inside = (1..=3).contains(&oy) && (1..=3).contains(&ox);
                assert_eq!(y.data()[oy * 6 + ox], if inside { 1.0 } else { 0.0 }, "({oy},{ox})");
            }
        }
    }

    #[test]
    fn corner_pixel_patch_is_clipped() {
        let mut x = Tensor::zeros(&[1, 2, 2]);
        x.data_mut()[0] = 1.0;
        let y = deconv2d(&x, &ones_bank()).unwrap();
        let expect = [
            1.0, 1.0, 0.0, 0.0, //
            1.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn zero_input_zero_output() {
        let x = Tensor::<f64>::zeros(&[1, 4, 4]);
        assert!(deconv2d(&x, &ones_bank()).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::<f64>::zeros(&[2, 4, 4]);
        assert!(matches!(deconv2d(&x, &ones_bank()), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_zero_grad() {
        let x = Tensor::full(&[1, 2, 2], 0.5);
        let (gi, gf) = deconv2d_backward(&Tensor::zeros(&[1, 4, 4]), &x, &ones_bank()).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(gf.weights.data().iter().all(|&v| v == 0.0));
    }
}
