use std::fs;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Rec.601 luma weights for R, G, B.
pub const LUMA_601: [f32; 3] = [0.299, 0.587, 0.114];

/// Single-channel frame with values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "frame {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Crops a `h × w` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<GrayFrame> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::Argument(format!(
                "crop {h}x{w} at ({y0},{x0}) exceeds frame {}x{}",
                self.height, self.width
            )));
        }
        let mut pixels = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            let row = &self.pixels[y * self.width + x0..y * self.width + x0 + w];
            pixels.extend_from_slice(row);
        }
        Ok(GrayFrame { width: w, height: h, pixels })
    }
}

/// An ordered clip of grayscale frames sharing one size.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<GrayFrame>,
    pub source_id: String,
    pub fps: Option<f32>,
    /// Temporal stride this sequence was subsampled with (1 for originals).
    pub stride: usize,
    /// Phase offset of the subsampling, 0-based.
    pub phase: usize,
}

impl FrameSequence {
    pub fn new(source_id: impl Into<String>, frames: Vec<GrayFrame>) -> Result<Self> {
        let source_id = source_id.into();
        if let Some(first) = frames.first() {
            for (i, f) in frames.iter().enumerate() {
                if (f.width, f.height) != (first.width, first.height) {
                    return Err(Error::Ingestion {
                        frame: format!("{source_id}[{i}]"),
                        message: format!(
                            "frame is {}x{}, sequence is {}x{}",
                            f.width, f.height, first.width, first.height
                        ),
                    });
                }
                if !f.in_unit_range() {
                    return Err(Error::Ingestion {
                        frame: format!("{source_id}[{i}]"),
                        message: "pixel values outside [0, 1]".into(),
                    });
                }
            }
        }
        Ok(Self {
            frames,
            source_id,
            fps: None,
            stride: 1,
            phase: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of every frame, or `None` for an empty sequence.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    /// Same metadata, different frames.
    pub(crate) fn with_frames(&self, frames: Vec<GrayFrame>) -> Self {
        Self {
            frames,
            source_id: self.source_id.clone(),
            fps: self.fps,
            stride: self.stride,
            phase: self.phase,
        }
    }

    /// Packs frames `start..start + n` as an `(n, H, W)` tensor.
    pub fn stack_tensor(&self, start: usize, n: usize) -> Result<Tensor<f32>> {
        let (w, h) = self.dims().ok_or_else(|| Error::Argument("empty sequence".into()))?;
        if start + n > self.len() {
            return Err(Error::Argument(format!(
                "frames {start}..{} out of range for {} frames",
                start + n,
                self.len()
            )));
        }
        let mut data = Vec::with_capacity(n * w * h);
        for f in &self.frames[start..start + n] {
            data.extend_from_slice(&f.pixels);
        }
        Tensor::from_vec(&[n, h, w], data)
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    #[serde(default)]
    pub fps: Option<f32>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm" | "pnm" | "pbm"))
        .unwrap_or(false)
}

fn ingest_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingestion {
        frame: path.display().to_string(),
        message: message.into(),
    }
}

/// Converts a decoded image to normalised luma.
pub fn image_to_gray(img: &DynamicImage) -> GrayFrame {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f32 / 255.0).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                let y = LUMA_601[0] * r as f32 + LUMA_601[1] * g as f32 + LUMA_601[2] * b as f32;
                (y / 255.0).clamp(0.0, 1.0)
            })
            .collect(),
    };
    GrayFrame { width: w, height: h, pixels }
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Lists image frames in a directory in lexicographic file-name order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| ingest_err(dir, e.to_string()))? {
        let p = entry.map_err(|e| ingest_err(dir, e.to_string()))?.path();
        if p.is_file() && is_image(&p) {
            files.push(p);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads a clip from a directory of PNG/PGM frames, or from a raw 8-bit
/// planar file with a JSON sidecar (`clip.raw` + `clip.json`).
pub fn load_frames(path: &Path) -> Result<FrameSequence> {
    if path.is_dir() {
        let files = list_frame_files(path)?;
        if files.is_empty() {
            return Err(ingest_err(path, "directory contains no PNG/PGM frames"));
        }
        let mut frames = Vec::with_capacity(files.len());
        for f in &files {
            let img = image::open(f).map_err(|e| ingest_err(f, e.to_string()))?;
            let g = image_to_gray(&img);
            if let Some(first) = frames.first().map(|x: &GrayFrame| (x.width, x.height)) {
                if (g.width, g.height) != first {
                    return Err(ingest_err(
                        f,
                        format!("frame is {}x{}, earlier frames are {}x{}", g.width, g.height, first.0, first.1),
                    ));
                }
            }
            frames.push(g);
        }
        FrameSequence::new(source_name(path), frames)
    } else {
        load_raw(path)
    }
}

fn load_raw(path: &Path) -> Result<FrameSequence> {
    let sidecar_path = path.with_extension("json");
    let sidecar: RawSidecar = serde_json::from_slice(
        &fs::read(&sidecar_path).map_err(|e| ingest_err(&sidecar_path, e.to_string()))?,
    )
    .map_err(|e| ingest_err(&sidecar_path, e.to_string()))?;
    let bytes = fs::read(path).map_err(|e| ingest_err(path, e.to_string()))?;
    let plane = sidecar.width * sidecar.height;
    if plane == 0 || sidecar.frames == 0 {
        return Err(ingest_err(path, "sidecar declares an empty clip"));
    }
    if bytes.len() != plane * sidecar.frames {
        return Err(ingest_err(
            path,
            format!(
                "expected {} bytes for {} frames of {}x{}, found {}",
                plane * sidecar.frames,
                sidecar.frames,
                sidecar.width,
                sidecar.height,
                bytes.len()
            ),
        ));
    }
    let frames = bytes
        .chunks_exact(plane)
        .map(|c| GrayFrame {
            width: sidecar.width,
            height: sidecar.height,
            pixels: c.iter().map(|&v| v as f32 / 255.0).collect(),
        })
        .collect();
    let mut seq = FrameSequence::new(source_name(path), frames)?;
    seq.fps = sidecar.fps;
    Ok(seq)
}

/// Quantises a frame to 8 bits.
pub fn to_u8(frame: &GrayFrame) -> Vec<u8> {
    frame
        .pixels
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Writes a clip as `frame_00000.pgm`, `frame_00001.pgm`, … under `dir`.
pub fn write_frame_dir(seq: &FrameSequence, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames.iter().enumerate() {
        let p = dir.join(format!("frame_{i:05}.pgm"));
        let mut buf = format!("P5\n{} {}\n255\n", f.width, f.height).into_bytes();
        buf.extend_from_slice(&to_u8(f));
        fs::write(&p, buf)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Rgb, RgbImage};

    #[test]
    fn white_frames_normalise_to_one() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..2 {
            GrayImage::from_pixel(4, 3, image::Luma([255]))
                .save(dir.path().join(format!("f{i}.png")))
                .unwrap();
        }
        let seq = load_frames(dir.path()).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.dims(), Some((4, 3)));
        assert!(seq.frames.iter().all(|f| f.pixels.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn red_frame_uses_rec601_luma() {
        let dir = tempfile::tempdir().unwrap();
        RgbImage::from_pixel(2, 2, Rgb([255, 0, 0])).save(dir.path().join("a.png")).unwrap();
        let seq = load_frames(dir.path()).unwrap();
        for &v in &seq.frames[0].pixels {
            assert!((v - 0.299).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn empty_directory_is_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_frames(dir.path()), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn inconsistent_dimensions_name_the_frame() {
        let dir = tempfile::tempdir().unwrap();
        GrayImage::new(4, 4).save(dir.path().join("a.png")).unwrap();
        GrayImage::new(4, 5).save(dir.path().join("b.png")).unwrap();
        match load_frames(dir.path()) {
            Err(Error::Ingestion { frame, .. }) => assert!(frame.ends_with("b.png")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frames_are_ordered_lexicographically() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("b.pgm", 20u8), ("a.pgm", 10), ("c.pgm", 30)] {
            GrayImage::from_pixel(1, 1, image::Luma([v])).save(dir.path().join(name)).unwrap();
        }
        let seq = load_frames(dir.path()).unwrap();
        let vals: Vec<f32> = seq.frames.iter().map(|f| f.pixels[0] * 255.0).collect();
        assert_eq!(vals.iter().map(|v| v.round() as u8).collect::<Vec<_>>(), [10, 20, 30]);
    }

    #[test]
    fn raw_planar_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("clip.raw");
        fs::write(&raw, [0u8, 51, 102, 153, 204, 255]).unwrap();
        fs::write(dir.path().join("clip.json"), r#"{"width": 3, "height": 1, "frames": 2, "fps": 30}"#).unwrap();
        let seq = load_frames(&raw).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.fps, Some(30.0));
        assert_eq!(seq.frames[1].pixels, vec![0.6, 0.8, 1.0]);
        fs::write(&raw, [0u8; 5]).unwrap();
        assert!(matches!(load_frames(&raw), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = GrayFrame::new(3, 2, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
        let seq = FrameSequence::new("x", vec![f.clone(), f]).unwrap();
        write_frame_dir(&seq, dir.path()).unwrap();
        let back = load_frames(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.frames[0].pixels.iter().zip(&seq.frames[0].pixels) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-7);
        }
    }
}
