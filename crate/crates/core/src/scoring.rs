//! Per-frame reconstruction error and exceptional-motion score.
//!
//! `e(t)` is the sum of squared differences between frame `t` and its
//! reconstruction; `s_m(t) = e(t) / sqrt(W · H)`.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::Reconstructor;
use crate::data::{FrameSequence, GrayFrame, STACK_FRAMES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub frame: usize,
    pub e: f64,
    pub s_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub video_id: String,
    pub width: usize,
    pub height: usize,
    pub entries: Vec<ScoreEntry>,
}

/// Sum of squared pixel differences, accumulated in double precision.
pub fn frame_error(original: &[f32], reconstructed: &[f32]) -> Result<f64> {
    if original.len() != reconstructed.len() {
        return Err(Error::Shape(format!(
            "frame_error: {} vs {} pixels",
            original.len(),
            reconstructed.len()
        )));
    }
    Ok(original
        .iter()
        .zip(reconstructed)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum())
}

/// [`frame_error`] for two frames, checking their dimensions.
pub fn frame_error_of(original: &GrayFrame, reconstructed: &GrayFrame) -> Result<f64> {
    if (original.width, original.height) != (reconstructed.width, reconstructed.height) {
        return Err(Error::Shape(format!(
            "frame_error: {}x{} vs {}x{}",
            original.width, original.height, reconstructed.width, reconstructed.height
        )));
    }
    frame_error(&original.pixels, &reconstructed.pixels)
}

pub fn motion_score(e: f64, width: usize, height: usize) -> f64 {
    e / ((width * height) as f64).sqrt()
}

/// Start of the window whose centre is frame `t`, clamped so the window
/// stays inside a clip of `len` frames.
pub fn window_start_for(t: usize, len: usize) -> usize {
    let half = STACK_FRAMES / 2;
    t.saturating_sub(half).min(len - STACK_FRAMES)
}

/// Scores every frame of a clip. Frame `t` is compared against its
/// reconstruction in the window centred on it; the first and last two frames
/// use the nearest full window.
pub fn score_video<R: Reconstructor + ?Sized>(model: &R, seq: &FrameSequence) -> Result<ScoreSeries> {
    let len = seq.len();
    if len < STACK_FRAMES {
        return Err(Error::Argument(format!(
            "{}: {len} frames, scoring needs at least {STACK_FRAMES}",
            seq.source_id
        )));
    }
    let (w, h) = seq.dims().expect("non-empty");
    let size = model.input_size();
    if (w, h) != (size, size) {
        return Err(Error::Shape(format!(
            "{}: frames are {w}x{h}, model expects {size}x{size}",
            seq.source_id
        )));
    }
    let n_windows = len - STACK_FRAMES + 1;
    let recon: Vec<Tensor<f32>> = (0..n_windows)
        .into_par_iter()
        .map(|start| model.reconstruct(&seq.stack_tensor(start, STACK_FRAMES)?))
        .collect::<Result<_>>()?;
    let entries = (0..len)
        .map(|t| {
            let start = window_start_for(t, len);
            let e = frame_error(&seq.frames[t].pixels, recon[start].plane(t - start))?;
            Ok(ScoreEntry {
                frame: t,
                e,
                s_m: motion_score(e, w, h),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreSeries {
        video_id: seq.source_id.clone(),
        width: w,
        height: h,
        entries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Aggregation {
    Mean,
    /// Nearest-rank percentile, `p` in `(0, 100]`.
    Percentile(f64),
}

impl Aggregation {
    pub fn label(&self) -> String {
        match self {
            Aggregation::Mean => "mean".into(),
            Aggregation::Percentile(p) => format!("p{p}"),
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "mean" {
            return Ok(Aggregation::Mean);
        }
        let num = s
            .strip_prefix("percentile-")
            .or_else(|| s.strip_prefix('p'))
            .ok_or_else(|| Error::Argument(format!("unknown aggregation `{s}`")))?;
        let p: f64 = num
            .parse()
            .map_err(|_| Error::Argument(format!("bad percentile `{num}`")))?;
        if !(p > 0.0 && p <= 100.0) {
            return Err(Error::Argument(format!("percentile {p} outside (0, 100]")));
        }
        Ok(Aggregation::Percentile(p))
    }
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the
/// data at or below it.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("percentile of an empty series".into()));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::Argument(format!("percentile {p} outside (0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

/// Reduces a series of `s_m` values to one number per video.
pub fn aggregate(series: &ScoreSeries, method: Aggregation) -> Result<f64> {
    if series.entries.is_empty() {
        return Err(Error::Argument(format!("{}: empty score series", series.video_id)));
    }
    let values: Vec<f64> = series.entries.iter().map(|e| e.s_m).collect();
    match method {
        Aggregation::Mean => Ok(values.iter().sum::<f64>() / values.len() as f64),
        Aggregation::Percentile(p) => percentile_nearest_rank(&values, p),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub video_id: String,
    pub n_frames: usize,
    pub mean_s_m: f64,
    pub p95_s_m: f64,
}

pub fn summarize(series: &ScoreSeries) -> Result<ScoreSummary> {
    Ok(ScoreSummary {
        video_id: series.video_id.clone(),
        n_frames: series.entries.len(),
        mean_s_m: aggregate(series, Aggregation::Mean)?,
        p95_s_m: aggregate(series, Aggregation::Percentile(95.0))?,
    })
}

/// `frame,e,s_m` with shortest round-trip float formatting.
pub fn series_to_csv(series: &ScoreSeries) -> String {
    let mut out = String::from("frame,e,s_m\n");
    for e in &series.entries {
        let _ = writeln!(out, "{},{},{}", e.frame, e.e, e.s_m);
    }
    out
}

/// Parses a score CSV written by [`series_to_csv`].
pub fn series_from_csv(video_id: &str, width: usize, height: usize, text: &str) -> Result<ScoreSeries> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["frame", "e", "s_m"] {
        return Err(Error::Validation(format!(
            "{video_id}: score CSV header must be `frame,e,s_m`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut entries = Vec::new();
    for rec in rdr.deserialize() {
        let entry: ScoreEntry = rec?;
        entries.push(entry);
    }
    Ok(ScoreSeries {
        video_id: video_id.to_string(),
        width,
        height,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Perfect;

    impl Reconstructor for Perfect {
        fn reconstruct(&self, stack: &Tensor<f32>) -> Result<Tensor<f32>> {
            Ok(stack.clone())
        }
        fn input_size(&self) -> usize {
            8
        }
    }

    /// Reconstructs every frame as the stack's mean frame.
    struct MeanFrame;

    impl Reconstructor for MeanFrame {
        fn reconstruct(&self, stack: &Tensor<f32>) -> Result<Tensor<f32>> {
            let (c, h, w) = stack.dim3();
            let mut mean = vec![0.0f32; h * w];
            for k in 0..c {
                for (m, v) in mean.iter_mut().zip(stack.plane(k)) {
                    *m += v / c as f32;
                }
            }
            Tensor::from_vec(&[c, h, w], mean.repeat(c))
        }
        fn input_size(&self) -> usize {
            8
        }
    }

    fn clip(n: usize, f: impl Fn(usize) -> f32) -> FrameSequence {
        FrameSequence::new("v", (0..n).map(|t| GrayFrame::filled(8, 8, f(t))).collect()).unwrap()
    }

    #[test]
    fn frame_error_examples() {
        let a = vec![0.0f32; 16384];
        assert_eq!(frame_error(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[100] = 0.5;
        assert_eq!(frame_error(&a, &b).unwrap(), 0.25);
        let ones = vec![1.0f32; 16384];
        assert_eq!(frame_error(&a, &ones).unwrap(), 16384.0);
        assert!(frame_error(&a, &ones[..10]).is_err());
    }

    #[test]
    fn motion_score_examples() {
        assert_eq!(motion_score(0.0, 128, 128), 0.0);
        assert_eq!(motion_score(128.0, 128, 128), 1.0);
        assert_eq!(motion_score(16384.0, 128, 128), 128.0);
    }

    #[test]
    fn center_attribution_with_edge_clamp() {
        let starts: Vec<_> = (0..8).map(|t| window_start_for(t, 8)).collect();
        assert_eq!(starts, [0, 0, 0, 1, 2, 3, 3, 3]);
        assert_eq!((0..5).map(|t| window_start_for(t, 5)).collect::<Vec<_>>(), [0; 5]);
    }

    #[test]
    fn perfect_model_scores_zero() {
        let s = score_video(&Perfect, &clip(9, |t| t as f32 / 10.0)).unwrap();
        assert_eq!(s.entries.len(), 9);
        assert!(s.entries.iter().all(|e| e.s_m == 0.0 && e.e == 0.0));
        assert_eq!(s.entries.iter().map(|e| e.frame).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn mean_frame_model_uses_centre_window() {
        // brightness ramps by 0.1 per frame; the centred window's mean equals
        // the centre frame, so interior frame t has error 64·(0)² only at the centre.
        let s = score_video(&MeanFrame, &clip(7, |t| t as f32 / 10.0)).unwrap();
        let e3 = s.entries[3].e;
        assert!(e3 < 1e-9, "{e3}");
        // frame 0 sits two frames from the centre of window 0..5
        assert!((s.entries[0].e - 64.0 * 0.04).abs() < 1e-5);
    }

    #[test]
    fn short_or_wrong_size_clip() {
        assert!(matches!(score_video(&Perfect, &clip(4, |_| 0.0)), Err(Error::Argument(_))));
        let big = FrameSequence::new("b", vec![GrayFrame::filled(16, 16, 0.0); 5]).unwrap();
        assert!(matches!(score_video(&Perfect, &big), Err(Error::Shape(_))));
    }

    fn series(values: &[f64]) -> ScoreSeries {
        ScoreSeries {
            video_id: "x".into(),
            width: 1,
            height: 1,
            entries: values.iter().enumerate().map(|(i, &v)| ScoreEntry { frame: i, e: v, s_m: v }).collect(),
        }
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(aggregate(&series(&[2.5; 4]), Aggregation::Mean).unwrap(), 2.5);
        assert_eq!(aggregate(&series(&[1.0, 2.0, 3.0]), Aggregation::Mean).unwrap(), 2.0);
        let mut v = vec![0.0; 100];
        v.push(100.0);
        assert_eq!(aggregate(&series(&v), Aggregation::Percentile(95.0)).unwrap(), 0.0);
        assert_eq!(aggregate(&series(&v), Aggregation::Percentile(100.0)).unwrap(), 100.0);
        assert!(aggregate(&series(&[]), Aggregation::Mean).is_err());
    }

    #[test]
    fn aggregation_parsing() {
        assert_eq!("mean".parse::<Aggregation>().unwrap(), Aggregation::Mean);
        assert_eq!("p95".parse::<Aggregation>().unwrap(), Aggregation::Percentile(95.0));
        assert_eq!("percentile-90".parse::<Aggregation>().unwrap(), Aggregation::Percentile(90.0));
        assert!("p0".parse::<Aggregation>().is_err());
        assert!("median".parse::<Aggregation>().is_err());
    }

    #[test]
    fn csv_round_trip_keeps_full_precision() {
        let s = series(&[0.1, 1.0 / 3.0, 12345.678901234567]);
        let text = series_to_csv(&s);
        assert!(text.starts_with("frame,e,s_m\n"));
        assert!(!text.contains('\r'));
        assert_eq!(series_from_csv("x", 1, 1, &text).unwrap(), s);
    }
}
