use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use exmo_core::autoencoder::load_model;
use exmo_core::data::{load_frames, resize, FrameSequence, Manifest, Role};
use exmo_core::scoring::{aggregate, score_video, series_to_csv, summarize, Aggregation, ScoreSeries};
use exmo_core::Reconstructor;
use log::info;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, parse_setting, require_exists, Context};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Clip to score: a frame directory or a raw file with JSON sidecar. Repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Score every `test` entry of this manifest as well.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-video aggregate: `mean` or a nearest-rank percentile such as `p95`.
    #[arg(long)]
    pub aggregation: Option<String>,
}

#[derive(Debug, Serialize)]
struct ScoreSettings {
    model: PathBuf,
    inputs: Vec<PathBuf>,
    manifest: Option<PathBuf>,
    aggregation: String,
}

/// Per-video JSON summary written next to the score curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub mean_s_m: f64,
    pub p95_s_m: f64,
    pub aggregation: String,
    pub aggregate: f64,
}

pub const SCORES_SUFFIX: &str = "_scores.csv";
pub const SUMMARY_SUFFIX: &str = "_summary.json";

fn video_id(path: &Path, label: Option<&str>) -> String {
    let raw = match label {
        Some(l) => l.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into()),
    };
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Brings a clip to the model's square input size.
pub fn fit_to_model(seq: &FrameSequence, size: usize) -> CliResult<FrameSequence> {
    match seq.dims() {
        Some((w, h)) if w == size && h == size => Ok(seq.clone()),
        _ => Ok(resize(seq, size, size)?),
    }
}

fn score_one(
    model: &dyn Reconstructor,
    path: &Path,
    id: &str,
    method: Aggregation,
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> CliResult<()> {
    let seq = fit_to_model(&load_frames(path)?, model.input_size())?;
    let mut series: ScoreSeries = score_video(model, &seq)?;
    series.video_id = id.to_string();
    let base = summarize(&series)?;
    let summary = VideoSummary {
        video_id: id.to_string(),
        width: series.width,
        height: series.height,
        n_frames: base.n_frames,
        mean_s_m: base.mean_s_m,
        p95_s_m: base.p95_s_m,
        aggregation: method.label(),
        aggregate: aggregate(&series, method)?,
    };
    let csv_path = out.join(format!("{id}{SCORES_SUFFIX}"));
    written.push(csv_path.clone());
    fs::write(&csv_path, series_to_csv(&series))?;
    let json_path = out.join(format!("{id}{SUMMARY_SUFFIX}"));
    written.push(json_path.clone());
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    info!("{id}: {} frames, {} s_m = {:.6}", summary.n_frames, summary.aggregation, summary.aggregate);
    println!("{id}\t{}\t{}", summary.aggregation, summary.aggregate);
    Ok(())
}

pub fn run(ctx: &Context, a: &ScoreArgs) -> CliResult<i32> {
    let method_str = a
        .aggregation
        .clone()
        .or_else(|| ctx.file.score.aggregation.clone())
        .unwrap_or_else(|| "mean".into());
    let method: Aggregation = parse_setting(&method_str, "aggregation")?;

    let mut jobs: Vec<(PathBuf, String)> = a.inputs.iter().map(|p| (p.clone(), video_id(p, None))).collect();
    if let Some(m) = &a.manifest {
        require_exists(m, "manifest")?;
        let manifest = Manifest::load(m)?;
        jobs.extend(
            manifest
                .with_role(Role::Test)
                .map(|e| (e.path.clone(), video_id(&e.path, e.label.as_deref()))),
        );
    }
    if jobs.is_empty() {
        return Err(CliError::usage("nothing to score: pass --input and/or --manifest with test entries"));
    }
    let mut ids: Vec<&str> = jobs.iter().map(|j| j.1.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::usage(format!("two inputs share the video id `{}`", w[0])));
    }

    if !a.model.is_file() {
        return Err(CliError::input(format!("model file {} does not exist", a.model.display())));
    }
    let model = load_model(&a.model).map_err(|e| CliError::input(format!("{}: {e}", a.model.display())))?;
    ensure_dir(&a.out)?;
    let mut written = Vec::new();
    for (path, id) in &jobs {
        if let Err(e) = score_one(&model, path, id, method, &a.out, &mut written) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
    }
    let settings = ScoreSettings {
        model: a.model.clone(),
        inputs: a.inputs.clone(),
        manifest: a.manifest.clone(),
        aggregation: method.label(),
    };
    ctx.record("score", settings).write(&a.out.join("score.run.json"))?;
    Ok(0)
}
