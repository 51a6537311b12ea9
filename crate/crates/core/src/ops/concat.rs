use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Stacks `b`'s channels after `a`'s. Both must share height and width.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (ca, ha, wa) = a.expect_rank3("concat_channels")?;
    let (cb, hb, wb) = b.expect_rank3("concat_channels")?;
    if (ha, wa) != (hb, wb) {
        return Err(Error::Shape(format!(
            "concat_channels: spatial extents differ, {ha}x{wa} vs {hb}x{wb}"
        )));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::from_vec(&[ca + cb, ha, wa], data)
}

/// Inverse of [`concat_channels`]: the first `at` channels and the rest.
pub fn split_channels<T: Real>(t: &Tensor<T>, at: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (c, h, w) = t.expect_rank3("split_channels")?;
    if at > c {
        return Err(Error::Shape(format!(
            "split_channels: cannot split {c} channels at {at}"
        )));
    }
    let (left, right) = t.data().split_at(at * h * w);
    Ok((
        Tensor::from_vec(&[at, h, w], left.to_vec())?,
        Tensor::from_vec(&[c - at, h, w], right.to_vec())?,
    ))
}
