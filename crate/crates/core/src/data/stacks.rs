use log::warn;
use serde::{Deserialize, Serialize};

use super::frames::{FrameSequence, GrayFrame};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const STACK_FRAMES: usize = 5;
pub const STACK_SIZE: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackOrigin {
    pub source_id: String,
    /// Index of the first frame within the (possibly subsampled) sequence.
    pub first_frame: usize,
    pub stride: usize,
    pub phase: usize,
}

/// Five consecutive 128×128 frames packed as a `(5, 128, 128)` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    tensor: Tensor<f32>,
    pub origin: StackOrigin,
}

impl FrameStack {
    pub fn new(tensor: Tensor<f32>, origin: StackOrigin) -> Result<Self> {
        if tensor.shape() != [STACK_FRAMES, STACK_SIZE, STACK_SIZE] {
            return Err(Error::Shape(format!(
                "frame stack must be {:?}, got {:?}",
                [STACK_FRAMES, STACK_SIZE, STACK_SIZE],
                tensor.shape()
            )));
        }
        if tensor.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument("frame stack values must lie in [0, 1]".into()));
        }
        Ok(Self { tensor, origin })
    }

    pub fn from_frames(frames: &[GrayFrame], origin: StackOrigin) -> Result<Self> {
        if frames.len() != STACK_FRAMES {
            return Err(Error::Shape(format!(
                "frame stack needs {STACK_FRAMES} frames, got {}",
                frames.len()
            )));
        }
        let mut data = Vec::with_capacity(STACK_FRAMES * STACK_SIZE * STACK_SIZE);
        for f in frames {
            if (f.width, f.height) != (STACK_SIZE, STACK_SIZE) {
                return Err(Error::Shape(format!(
                    "stack frames must be {STACK_SIZE}x{STACK_SIZE}, got {}x{}",
                    f.width, f.height
                )));
            }
            data.extend_from_slice(&f.pixels);
        }
        Self::new(Tensor::from_vec(&[STACK_FRAMES, STACK_SIZE, STACK_SIZE], data)?, origin)
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.tensor
    }
}

impl AsRef<Tensor<f32>> for FrameStack {
    fn as_ref(&self) -> &Tensor<f32> {
        &self.tensor
    }
}

/// 0-based frame indices of each phase for temporal stride `s`:
/// `[0, s, 2s, …]`, `[1, s+1, …]`, …, `[s−1, …]`.
pub fn stride_phases(len: usize, stride: usize) -> Vec<Vec<usize>> {
    if stride == 0 || len < stride {
        return Vec::new();
    }
    (0..stride).map(|p| (p..len).step_by(stride).collect()).collect()
}

/// Temporal augmentation: for every stride `s`, the `s` phase-shifted
/// subsequences taking every `s`-th frame. Strides that cannot produce any
/// phase are skipped with a warning.
pub fn temporal_augment(seq: &FrameSequence, strides: &[usize]) -> Vec<FrameSequence> {
    let mut out = Vec::new();
    for &s in strides {
        let phases = stride_phases(seq.len(), s);
        if phases.is_empty() {
            warn!(
                "{}: skipping temporal stride {s} for a {}-frame sequence",
                seq.source_id,
                seq.len()
            );
            continue;
        }
        for (p, idx) in phases.into_iter().enumerate() {
            if idx.len() < STACK_FRAMES {
                warn!(
                    "{}: stride {s} phase {p} has {} frames, too few for a {STACK_FRAMES}-frame stack",
                    seq.source_id,
                    idx.len()
                );
            }
            let mut sub = seq.with_frames(idx.iter().map(|&i| seq.frames[i].clone()).collect());
            sub.stride = seq.stride * s;
            sub.phase = seq.phase + p * seq.stride;
            out.push(sub);
        }
    }
    out
}

/// Sliding 5-frame windows advancing by `step` frames.
pub fn window_stacks(seq: &FrameSequence, window: usize, step: usize) -> Result<Vec<FrameStack>> {
    if window != STACK_FRAMES {
        return Err(Error::Argument(format!(
            "window must be {STACK_FRAMES} frames, got {window}"
        )));
    }
    if step == 0 {
        return Err(Error::Argument("window step must be at least 1".into()));
    }
    if seq.len() < window {
        return Err(Error::Argument(format!(
            "{}: {} frames, a stack needs {window}",
            seq.source_id,
            seq.len()
        )));
    }
    if let Some((w, h)) = seq.dims() {
        if (w, h) != (STACK_SIZE, STACK_SIZE) {
            return Err(Error::Shape(format!(
                "{}: frames are {w}x{h}, stacks need {STACK_SIZE}x{STACK_SIZE}",
                seq.source_id
            )));
        }
    }
    (0..=seq.len() - window)
        .step_by(step)
        .map(|start| {
            FrameStack::from_frames(
                &seq.frames[start..start + window],
                StackOrigin {
                    source_id: seq.source_id.clone(),
                    first_frame: start,
                    stride: seq.stride,
                    phase: seq.phase,
                },
            )
        })
        .collect()
}
