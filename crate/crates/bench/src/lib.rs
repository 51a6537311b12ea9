//! Fixtures shared by the kernel benchmarks.

use exmo_core::data::{window_stacks, FrameStack};
use exmo_core::ops::FilterBank;
use exmo_core::synthcam::{generate, SynthSpec, Texture};
use exmo_core::Tensor;

/// Deterministic pseudo-random fill in [-1, 1).
pub fn filled(shape: &[usize], salt: u64) -> Tensor<f32> {
    let n: usize = shape.iter().product();
    let mut state = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let data = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 40) as f32 / (1u64 << 23) as f32 - 1.0
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}

pub fn filters(out_channels: usize, in_channels: usize) -> FilterBank<f32> {
    let w = filled(&[out_channels, in_channels, 3, 3], 7);
    let b = filled(&[out_channels], 11);
    FilterBank::from_tensors(w, b).expect("valid filter shapes")
}

/// `count` 5×128×128 stacks cut from a moving noise clip.
pub fn stacks(count: usize) -> Vec<FrameStack> {
    let clip = generate(&SynthSpec::new(Texture::Noise, 2.0, count + 4, 0)).expect("valid synth spec");
    window_stacks(&clip, 5, 1).expect("clip long enough")
}
