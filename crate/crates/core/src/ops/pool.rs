use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Argmax positions recorded by [`maxpool2`]. Each output cell stores the
/// offset `dy * 2 + dx` of the winning cell inside its 2×2 window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolIndexMap {
    input_shape: [usize; 3],
    offsets: Vec<u8>,
}

impl PoolIndexMap {
    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn output_shape(&self) -> [usize; 3] {
        let [c, h, w] = self.input_shape;
        [c, h / 2, w / 2]
    }

    /// Absolute `(row, col)` in the input plane of the maximum feeding output
    /// cell `(c, oy, ox)`.
    pub fn coordinate(&self, c: usize, oy: usize, ox: usize) -> (usize, usize) {
        let [_, oh, ow] = self.output_shape();
        let off = self.offsets[(c * oh + oy) * ow + ox] as usize;
        (2 * oy + off / 2, 2 * ox + off % 2)
    }
}

/// 2×2 max pooling with stride 2. Ties go to the first cell in row-major
/// window order.
pub fn maxpool2<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndexMap)> {
    let (c, h, w) = input.expect_rank3("maxpool2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!(
            "maxpool2: spatial extent {h}x{w} is not even"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut offsets = vec![0u8; c * oh * ow];
    let data = input.data();
    let dst = out.data_mut();
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let cells = [data[top], data[top + 1], data[top + w], data[top + w + 1]];
                let mut best = 0;
                for (i, &v) in cells.iter().enumerate().skip(1) {
                    if v > cells[best] {
                        best = i;
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                dst[o] = cells[best];
                offsets[o] = best as u8;
            }
        }
    }
    Ok((
        out,
        PoolIndexMap {
            input_shape: [c, h, w],
            offsets,
        },
    ))
}

/// Routes each pooled gradient back to the argmax cell it came from.
pub fn maxpool2_backward<T: Real>(
    grad_out: &Tensor<T>,
    indices: &PoolIndexMap,
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if input_shape != indices.input_shape {
        return Err(Error::Shape(format!(
            "maxpool2_backward: index map was built for {:?}, asked for {input_shape:?}",
            indices.input_shape
        )));
    }
    if grad_out.shape() != indices.output_shape() {
        return Err(Error::Shape(format!(
            "maxpool2_backward: grad_out {:?} does not match pooled shape {:?}",
            grad_out.shape(),
            indices.output_shape()
        )));
    }
    let [c, h, w] = indices.input_shape;
    let [_, oh, ow] = indices.output_shape();
    let mut grad_in = Tensor::zeros(&[c, h, w]);
    let g = grad_out.data();
    let dst = grad_in.data_mut();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let (y, x) = indices.coordinate(ch, oy, ox);
                dst[(ch * h + y) * w + x] = g[(ch * oh + oy) * ow + ox];
            }
        }
    }
    Ok(grad_in)
}
