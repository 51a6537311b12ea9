use std::fs;
use std::path::PathBuf;

use clap::Args;
use exmo_core::ssq::{describe_total, parse_responses_csv, score_all, scores_to_csv, SubjectiveMode, TotalFormula};
use serde::Serialize;

use super::{ensure_dir, parse_setting, require_exists, Context};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct SsqArgs {
    /// Responses CSV: `subject,content,phase` then one column per symptom.
    #[arg(long)]
    pub responses: PathBuf,
    /// Output directory; `ssq_scores.csv` is written there.
    #[arg(long)]
    pub out: PathBuf,
    /// `flat` (3.74 × sum of all ratings) or `kennedy` (3.74 × cluster raw sums).
    #[arg(long)]
    pub formula: Option<String>,
    /// `delta` (post minus pre) or `raw-post`.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Serialize)]
struct SsqSettings {
    responses: PathBuf,
    formula: TotalFormula,
    mode: SubjectiveMode,
}

pub const SCORES_FILE: &str = "ssq_scores.csv";

pub fn resolve(ctx: &Context, formula: Option<&String>, mode: Option<&String>) -> CliResult<(TotalFormula, SubjectiveMode)> {
    let f = formula.or(ctx.file.ssq.formula.as_ref());
    let m = mode.or(ctx.file.ssq.mode.as_ref());
    let formula = match f {
        Some(v) => parse_setting(v, "formula")?,
        None => TotalFormula::default(),
    };
    let mode = match m {
        Some(v) => parse_setting(v, "mode")?,
        None => SubjectiveMode::default(),
    };
    Ok((formula, mode))
}

pub fn run(ctx: &Context, a: &SsqArgs) -> CliResult<i32> {
    require_exists(&a.responses, "responses file")?;
    let (formula, mode) = resolve(ctx, a.formula.as_ref(), a.mode.as_ref())?;
    let responses = parse_responses_csv(&fs::read_to_string(&a.responses)?)?;
    let records = score_all(&responses, formula, mode)?;
    ensure_dir(&a.out)?;
    fs::write(a.out.join(SCORES_FILE), scores_to_csv(&records))?;
    for r in &records {
        println!("{}\t{}\t{}", r.content, r.subject, describe_total(r.score.total));
    }
    ctx.record("ssq", SsqSettings { responses: a.responses.clone(), formula, mode })
        .write(&a.out.join("ssq.run.json"))?;
    Ok(0)
}
