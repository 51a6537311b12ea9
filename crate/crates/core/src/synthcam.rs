//! Synthetic clips with controlled motion velocity.
//!
//! A periodic base texture is translated horizontally by `t · velocity`
//! pixels in frame `t`, wrapping around the frame edge, with linear
//! interpolation for sub-pixel shifts. Rotation mode spins the texture
//! about the frame centre by `t · velocity` degrees instead.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FrameSequence, GrayFrame};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Texture {
    Checker,
    Noise,
    Gradient,
}

impl Texture {
    pub fn as_str(self) -> &'static str {
        match self {
            Texture::Checker => "checker",
            Texture::Noise => "noise",
            Texture::Gradient => "gradient",
        }
    }
}

impl FromStr for Texture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "checker" => Ok(Texture::Checker),
            "noise" => Ok(Texture::Noise),
            "gradient" => Ok(Texture::Gradient),
            other => Err(Error::Argument(format!("unknown texture `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    #[default]
    Translate,
    Rotate,
}

impl FromStr for Motion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "translate" => Ok(Motion::Translate),
            "rotate" => Ok(Motion::Rotate),
            other => Err(Error::Argument(format!("unknown motion `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub texture: Texture,
    /// Pixels per frame (translation) or degrees per frame (rotation).
    pub velocity: f64,
    pub n_frames: usize,
    pub size: usize,
    pub seed: u64,
    #[serde(default)]
    pub motion: Motion,
}

impl SynthSpec {
    pub fn new(texture: Texture, velocity: f64, n_frames: usize, seed: u64) -> Self {
        Self {
            texture,
            velocity,
            n_frames,
            size: 128,
            seed,
            motion: Motion::Translate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 5 {
            return Err(Error::Argument(format!("n_frames must be >= 5, got {}", self.n_frames)));
        }
        if self.size < 16 {
            return Err(Error::Argument(format!("size must be >= 16, got {}", self.size)));
        }
        if !(self.velocity.is_finite() && self.velocity >= 0.0) {
            return Err(Error::Argument(format!("velocity must be finite and >= 0, got {}", self.velocity)));
        }
        Ok(())
    }

    pub fn source_id(&self) -> String {
        let m = match self.motion {
            Motion::Translate => "",
            Motion::Rotate => "-rot",
        };
        format!("synth-{}{m}-v{}-s{}", self.texture.as_str(), self.velocity, self.seed)
    }
}

/// Periodic `size × size` base texture in `[0, 1]`.
pub fn base_texture(texture: Texture, size: usize, seed: u64) -> Vec<f32> {
    match texture {
        Texture::Checker => {
            let cell = (size / 8).max(8);
            (0..size * size)
                .map(|i| {
                    let (y, x) = (i / size, i % size);
                    if (y / cell + x / cell) % 2 == 0 {
                        0.2
                    } else {
                        0.8
                    }
                })
                .collect()
        }
        Texture::Gradient => {
            let tri = |u: usize| {
                let p = u as f64 / size as f64;
                1.0 - (2.0 * p - 1.0).abs()
            };
            (0..size * size)
                .map(|i| (0.1 + 0.8 * 0.5 * (tri(i % size) + tri(i / size))) as f32)
                .collect()
        }
        Texture::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coarse = lattice_noise(size, (size / 16).max(2), &mut rng);
            let fine = lattice_noise(size, (size / 4).max(2), &mut rng);
            coarse
                .iter()
                .zip(&fine)
                .map(|(c, f)| (0.1 + 0.8 * (0.65 * c + 0.35 * f)) as f32)
                .collect()
        }
    }
}

/// Bilinearly interpolated random lattice with `cells` points per axis,
/// periodic over `size`.
fn lattice_noise<R: Rng>(size: usize, cells: usize, rng: &mut R) -> Vec<f64> {
    let grid: Vec<f64> = (0..cells * cells).map(|_| rng.gen::<f64>()).collect();
    let spacing = size as f64 / cells as f64;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        let gy = y as f64 / spacing;
        let (y0, fy) = (gy.floor() as usize % cells, gy.fract());
        let y1 = (y0 + 1) % cells;
        for x in 0..size {
            let gx = x as f64 / spacing;
            let (x0, fx) = (gx.floor() as usize % cells, gx.fract());
            let x1 = (x0 + 1) % cells;
            let top = grid[y0 * cells + x0] * (1.0 - fx) + grid[y0 * cells + x1] * fx;
            let bot = grid[y1 * cells + x0] * (1.0 - fx) + grid[y1 * cells + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

fn translate(tex: &[f32], size: usize, shift: f64) -> Vec<f32> {
    let whole = shift.floor();
    let frac = (shift - whole) as f32;
    let n = size as i64;
    let offset = (whole as i64).rem_euclid(n) as usize;
    let mut out = Vec::with_capacity(size * size);
    for row in tex.chunks_exact(size) {
        for x in 0..size {
            // value at x comes from texture position x - shift
            let x0 = (x + size - offset) % size;
            let xm = (x0 + size - 1) % size;
            let v = if frac == 0.0 {
                row[x0]
            } else {
                row[x0] * (1.0 - frac) + row[xm] * frac
            };
            out.push(v);
        }
    }
    out
}

fn rotate(tex: &[f32], size: usize, degrees: f64) -> Vec<f32> {
    let (s, c) = degrees.to_radians().sin_cos();
    let centre = (size as f64 - 1.0) / 2.0;
    let n = size as f64;
    let sample = |y: i64, x: i64| tex[(y.rem_euclid(size as i64) * size as i64 + x.rem_euclid(size as i64)) as usize] as f64;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 - centre, y as f64 - centre);
            let sx = (c * dx + s * dy + centre).rem_euclid(n);
            let sy = (-s * dx + c * dy + centre).rem_euclid(n);
            let (x0, y0) = (sx.floor() as i64, sy.floor() as i64);
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let top = sample(y0, x0) * (1.0 - fx) + sample(y0, x0 + 1) * fx;
            let bot = sample(y0 + 1, x0) * (1.0 - fx) + sample(y0 + 1, x0 + 1) * fx;
            out.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0) as f32);
        }
    }
    out
}

pub fn generate(spec: &SynthSpec) -> Result<FrameSequence> {
    spec.validate()?;
    let n = spec.size;
    let tex = base_texture(spec.texture, n, spec.seed);
    let frames = (0..spec.n_frames)
        .map(|t| {
            let amount = t as f64 * spec.velocity;
            let pixels = match spec.motion {
                Motion::Translate => translate(&tex, n, amount),
                Motion::Rotate => rotate(&tex, n, amount),
            };
            GrayFrame::new(n, n, pixels)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(spec.source_id(), frames)
}

/// Mean absolute difference between consecutive frames.
pub fn mean_interframe_difference(seq: &FrameSequence) -> f64 {
    let pairs = seq.frames.windows(2);
    let n = seq.len().saturating_sub(1).max(1) as f64;
    pairs
        .map(|w| {
            let d: f64 = w[0]
                .pixels
                .iter()
                .zip(&w[1].pixels)
                .map(|(a, b)| (a - b).abs() as f64)
                .sum();
            d / w[0].pixels.len() as f64
        })
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_is_static() {
        for tex in [Texture::Checker, Texture::Noise, Texture::Gradient] {
            let s = generate(&SynthSpec::new(tex, 0.0, 6, 1)).unwrap();
            assert!(s.frames.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn integer_velocity_is_cyclic_shift() {
        for v in [1usize, 3, 8] {
            let s = generate(&SynthSpec::new(Texture::Checker, v as f64, 5, 0)).unwrap();
            for w in s.frames.windows(2) {
                for y in 0..128 {
                    for x in 0..128 {
                        assert_eq!(w[1].at(y, (x + v) % 128), w[0].at(y, x));
                    }
                }
            }
        }
    }

    #[test]
    fn values_in_unit_range() {
        for tex in [Texture::Checker, Texture::Noise, Texture::Gradient] {
            let t = base_texture(tex, 64, 9);
            assert!(t.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn seeded_noise() {
        assert_eq!(base_texture(Texture::Noise, 32, 4), base_texture(Texture::Noise, 32, 4));
        assert_ne!(base_texture(Texture::Noise, 32, 4), base_texture(Texture::Noise, 32, 5));
    }

    #[test]
    fn invalid_specs() {
        let ok = SynthSpec::new(Texture::Noise, 1.0, 5, 0);
        assert!(generate(&SynthSpec { n_frames: 4, ..ok.clone() }).is_err());
        assert!(generate(&SynthSpec { size: 8, ..ok.clone() }).is_err());
        assert!(generate(&SynthSpec { velocity: -1.0, ..ok }).is_err());
    }

    #[test]
    fn rotation_mode_moves_pixels() {
        let spec = SynthSpec { motion: Motion::Rotate, ..SynthSpec::new(Texture::Noise, 5.0, 5, 2) };
        let s = generate(&spec).unwrap();
        assert!(mean_interframe_difference(&s) > 0.0);
        let still = SynthSpec { velocity: 0.0, ..spec };
        assert_eq!(mean_interframe_difference(&generate(&still).unwrap()), 0.0);
    }
}
