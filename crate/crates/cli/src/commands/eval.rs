use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use exmo_core::evaluation::{emit_report, emit_rows_report, ContentRow, ReportSummary};
use exmo_core::scoring::{series_from_csv, Aggregation, ScoreSeries};
use exmo_core::ssq::{parse_responses_csv, score_all, scores_from_csv, SsqRecord};
use serde::{Deserialize, Serialize};

use super::score::{VideoSummary, SCORES_SUFFIX, SUMMARY_SUFFIX};
use super::{ensure_dir, parse_setting, require_exists, Context};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pre-aggregated CSV with columns `content,objective,subjective`.
    #[arg(long, conflicts_with_all = ["series", "ssq", "responses"])]
    pub pairs: Option<PathBuf>,
    /// Directory holding `<id>_scores.csv` files from `score`.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Scored SSQ CSV from the `ssq` command.
    #[arg(long, conflicts_with = "responses")]
    pub ssq: Option<PathBuf>,
    /// Raw SSQ responses CSV, scored on the fly.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub formula: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Per-video aggregate of s_m: `mean` or e.g. `p95`.
    #[arg(long)]
    pub aggregation: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct PairRow {
    content: String,
    objective: f64,
    subjective: f64,
}

#[derive(Debug, Serialize)]
struct EvalSettings {
    pairs: Option<PathBuf>,
    series: Option<PathBuf>,
    ssq: Option<PathBuf>,
    responses: Option<PathBuf>,
    aggregation: String,
}

fn read_pairs(path: &Path) -> CliResult<Vec<ContentRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let r: PairRow = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        rows.push(ContentRow {
            content: r.content,
            objective: r.objective,
            n_subjects: 1,
            mean_subjective: Some(r.subjective),
        });
    }
    rows.sort_by(|a, b| a.content.cmp(&b.content));
    if rows.windows(2).any(|w| w[0].content == w[1].content) {
        return Err(CliError::input(format!("{}: duplicate content ids", path.display())));
    }
    Ok(rows)
}

/// Loads every `<id>_scores.csv` in `dir`, ordered by id.
pub fn read_series_dir(dir: &Path) -> CliResult<Vec<ScoreSeries>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SCORES_SUFFIX)))
        .collect();
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let id = &name[..name.len() - SCORES_SUFFIX.len()];
        let (w, h) = match fs::read_to_string(dir.join(format!("{id}{SUMMARY_SUFFIX}"))) {
            Ok(text) => {
                let s: VideoSummary = serde_json::from_str(&text)?;
                (s.width, s.height)
            }
            Err(_) => (0, 0),
        };
        out.push(series_from_csv(id, w, h, &fs::read_to_string(&f)?)?);
    }
    if out.is_empty() {
        return Err(CliError::input(format!("no *{SCORES_SUFFIX} files in {}", dir.display())));
    }
    Ok(out)
}

fn read_ssq(ctx: &Context, a: &EvalArgs) -> CliResult<Vec<SsqRecord>> {
    if let Some(p) = &a.ssq {
        require_exists(p, "SSQ scores file")?;
        return Ok(scores_from_csv(&fs::read_to_string(p)?)?);
    }
    if let Some(p) = &a.responses {
        require_exists(p, "responses file")?;
        let (formula, mode) = super::ssq::resolve(ctx, a.formula.as_ref(), a.mode.as_ref())?;
        return Ok(score_all(&parse_responses_csv(&fs::read_to_string(p)?)?, formula, mode)?);
    }
    Ok(Vec::new())
}

fn print_summary(summary: &ReportSummary) {
    match summary.plcc {
        Some(r) => println!("plcc\t{r}\tn={}", summary.n_contents),
        None => println!("plcc\tunavailable\tn={}", summary.n_contents),
    }
    for c in &summary.caveats {
        println!("caveat\t{c}");
    }
}

pub fn run(ctx: &Context, a: &EvalArgs) -> CliResult<i32> {
    let method_str = a
        .aggregation
        .clone()
        .or_else(|| ctx.file.score.aggregation.clone())
        .unwrap_or_else(|| "mean".into());
    let method: Aggregation = parse_setting(&method_str, "aggregation")?;

    let summary = match (&a.pairs, &a.series) {
        (Some(p), None) => {
            require_exists(p, "pairs file")?;
            let rows = read_pairs(p)?;
            ensure_dir(&a.out)?;
            emit_rows_report(&rows, method, &a.out)?.0
        }
        (None, Some(dir)) => {
            require_exists(dir, "series directory")?;
            let series = read_series_dir(dir)?;
            let ssq = read_ssq(ctx, a)?;
            ensure_dir(&a.out)?;
            emit_report(&series, &ssq, method, &a.out)?.0
        }
        _ => return Err(CliError::usage("pass exactly one of --pairs or --series")),
    };
    print_summary(&summary);
    let settings = EvalSettings {
        pairs: a.pairs.clone(),
        series: a.series.clone(),
        ssq: a.ssq.clone(),
        responses: a.responses.clone(),
        aggregation: method.label(),
    };
    ctx.record("eval", settings).write(&a.out.join("eval.run.json"))?;
    Ok(0)
}
