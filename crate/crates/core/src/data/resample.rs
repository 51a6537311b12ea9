use rand::Rng;

use super::frames::{FrameSequence, GrayFrame};
use super::stacks::{FrameStack, StackOrigin, STACK_FRAMES, STACK_SIZE};
use crate::error::{Error, Result};

/// Source sample positions and weights for one output axis, using pixel
/// centres (`src = (dst + 0.5) · scale − 0.5`) clamped to the edge.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f32)> {
    let scale = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src_len - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

/// Bilinear resize of one frame, with output clamped to `[0, 1]`.
pub fn resize_frame(frame: &GrayFrame, height: usize, width: usize) -> Result<GrayFrame> {
    if height == 0 || width == 0 {
        return Err(Error::Argument(format!("resize target {height}x{width} is empty")));
    }
    if frame.width == 0 || frame.height == 0 {
        return Err(Error::Argument("cannot resize an empty frame".into()));
    }
    if (frame.height, frame.width) == (height, width) {
        return Ok(frame.clone());
    }
    let xs = axis_taps(frame.width, width);
    let ys = axis_taps(frame.height, height);
    let mut pixels = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = frame.at(y0, x0) * (1.0 - fx) + frame.at(y0, x1) * fx;
            let bot = frame.at(y1, x0) * (1.0 - fx) + frame.at(y1, x1) * fx;
            pixels.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
        }
    }
    Ok(GrayFrame { width, height, pixels })
}

/// Bilinear resize of every frame in the clip.
pub fn resize(seq: &FrameSequence, height: usize, width: usize) -> Result<FrameSequence> {
    if seq.is_empty() {
        return Err(Error::Argument("cannot resize an empty sequence".into()));
    }
    let frames = seq
        .frames
        .iter()
        .map(|f| resize_frame(f, height, width))
        .collect::<Result<Vec<_>>>()?;
    Ok(seq.with_frames(frames))
}

/// Halves both extents (rounding down) with bilinear resampling.
pub fn half_resize(seq: &FrameSequence) -> Result<FrameSequence> {
    let (w, h) = seq
        .dims()
        .ok_or_else(|| Error::Argument("cannot resize an empty sequence".into()))?;
    resize(seq, h / 2, w / 2)
}

/// Draws a uniformly random top-left corner for a `size × size` crop.
pub fn draw_crop_offset<R: Rng>(height: usize, width: usize, size: usize, rng: &mut R) -> Result<(usize, usize)> {
    if height < size || width < size {
        return Err(Error::Argument(format!(
            "{height}x{width} is smaller than the {size}x{size} crop"
        )));
    }
    Ok((rng.gen_range(0..=height - size), rng.gen_range(0..=width - size)))
}

fn check_half_size(seq: &FrameSequence) -> Result<(usize, usize)> {
    let (w, h) = seq
        .dims()
        .ok_or_else(|| Error::Argument("cannot crop an empty sequence".into()))?;
    let (hh, hw) = (h / 2, w / 2);
    if hh < STACK_SIZE || hw < STACK_SIZE {
        return Err(Error::Argument(format!(
            "{w}x{h} halves to {hw}x{hh}, smaller than {STACK_SIZE}x{STACK_SIZE}"
        )));
    }
    Ok((hh, hw))
}

/// Halves the clip and takes one random 128×128 crop shared by all frames.
pub fn half_resize_random_crop<R: Rng>(seq: &FrameSequence, rng: &mut R) -> Result<FrameSequence> {
    let (hh, hw) = check_half_size(seq)?;
    let half = half_resize(seq)?;
    let (y0, x0) = draw_crop_offset(hh, hw, STACK_SIZE, rng)?;
    let frames = half
        .frames
        .iter()
        .map(|f| f.crop(y0, x0, STACK_SIZE, STACK_SIZE))
        .collect::<Result<Vec<_>>>()?;
    Ok(seq.with_frames(frames))
}

/// Per-window variant of [`half_resize_random_crop`]: every 5-frame stack
/// gets its own crop offset.
pub fn half_resize_crop_stacks<R: Rng>(seq: &FrameSequence, step: usize, rng: &mut R) -> Result<Vec<FrameStack>> {
    let (hh, hw) = check_half_size(seq)?;
    if step == 0 {
        return Err(Error::Argument("window step must be at least 1".into()));
    }
    if seq.len() < STACK_FRAMES {
        return Err(Error::Argument(format!(
            "sequence has {} frames, a stack needs {STACK_FRAMES}",
            seq.len()
        )));
    }
    let half = half_resize(seq)?;
    let mut out = Vec::new();
    for start in (0..=seq.len() - STACK_FRAMES).step_by(step) {
        let (y0, x0) = draw_crop_offset(hh, hw, STACK_SIZE, rng)?;
        let frames = half.frames[start..start + STACK_FRAMES]
            .iter()
            .map(|f| f.crop(y0, x0, STACK_SIZE, STACK_SIZE))
            .collect::<Result<Vec<_>>>()?;
        out.push(FrameStack::from_frames(
            &frames,
            StackOrigin {
                source_id: seq.source_id.clone(),
                first_frame: start,
                stride: seq.stride,
                phase: seq.phase,
            },
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq_of(w: usize, h: usize, n: usize, f: impl Fn(usize, usize) -> f32) -> FrameSequence {
        let frame = GrayFrame::new(w, h, (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| f(y, x)).collect()).unwrap();
        FrameSequence::new("t", vec![frame; n]).unwrap()
    }

    #[test]
    fn constant_stays_constant() {
        let s = seq_of(37, 23, 2, |_, _| 0.4);
        for (h, w) in [(128, 128), (5, 90), (1, 1)] {
            let r = resize(&s, h, w).unwrap();
            assert!(r.frames[0].pixels.iter().all(|&v| (v - 0.4).abs() < 1e-6));
            assert_eq!(r.dims(), Some((w, h)));
        }
    }

    #[test]
    fn downscale_shape() {
        let s = seq_of(256, 256, 1, |y, x| ((x + y) % 7) as f32 / 7.0);
        assert_eq!(resize(&s, 128, 128).unwrap().dims(), Some((128, 128)));
    }

    #[test]
    fn ramp_stays_monotone() {
        let s = seq_of(200, 50, 1, |_, x| x as f32 / 199.0);
        for w in [128, 333] {
            let r = resize(&s, 128, w).unwrap();
            for row in r.frames[0].pixels.chunks(w) {
                assert!(row.windows(2).all(|p| p[0] <= p[1]));
            }
        }
    }

    #[test]
    fn zero_target_rejected() {
        let s = seq_of(4, 4, 1, |_, _| 0.0);
        assert!(matches!(resize(&s, 0, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn kitti_geometry() {
        let s = seq_of(1242, 375, 1, |y, x| ((x * 3 + y) % 255) as f32 / 255.0);
        let half = half_resize(&s).unwrap();
        assert_eq!(half.dims(), Some((621, 187)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = half_resize_random_crop(&s, &mut rng).unwrap();
        assert_eq!(c.dims(), Some((128, 128)));
    }

    #[test]
    fn forced_offset_for_256() {
        let s = seq_of(256, 256, 2, |y, x| ((x + 2 * y) % 256) as f32 / 255.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = half_resize_random_crop(&s, &mut rng).unwrap();
        assert_eq!(c.frames[0], half_resize(&s).unwrap().frames[0]);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(draw_crop_offset(128, 128, 128, &mut rng).unwrap(), (0, 0));
        }
    }

    #[test]
    fn same_seed_same_crop() {
        let s = seq_of(600, 400, 3, |y, x| ((x * 7 + y * 3) % 101) as f32 / 100.0);
        let a = half_resize_random_crop(&s, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = half_resize_random_crop(&s, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let oa = draw_crop_offset(200, 300, 128, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let ob = draw_crop_offset(200, 300, 128, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(oa, ob);
    }

    #[test]
    fn too_small_after_halving() {
        let s = seq_of(255, 300, 1, |_, _| 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(half_resize_random_crop(&s, &mut rng), Err(Error::Argument(_))));
    }

    #[test]
    fn per_stack_crops() {
        let s = seq_of(400, 300, 7, |y, x| ((x + y) % 50) as f32 / 49.0);
        let stacks = half_resize_crop_stacks(&s, 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(stacks.len(), 3);
        assert_eq!(stacks[2].origin.first_frame, 2);
    }
}
