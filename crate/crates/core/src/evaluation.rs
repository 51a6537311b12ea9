//! Correlation of per-video motion scores with subjective SSQ totals, and
//! the on-disk report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{aggregate, series_to_csv, Aggregation, ScoreSeries};
use crate::ssq::{classify_total, SsqRecord, SICKNESS_BAND};

/// Below this many contents the report carries a small-sample caveat.
pub const SMALL_SAMPLE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub content: String,
    pub objective: f64,
    pub subjective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedObservations {
    pairs: Vec<Pair>,
}

impl PairedObservations {
    pub fn new(pairs: Vec<Pair>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Degenerate(format!(
                "correlation needs at least 2 pairs, got {}",
                pairs.len()
            )));
        }
        if pairs.iter().any(|p| !p.objective.is_finite() || !p.subjective.is_finite()) {
            return Err(Error::Degenerate("non-finite observation".into()));
        }
        Ok(Self { pairs })
    }

    pub fn from_vectors(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Argument(format!("vector lengths differ: {} vs {}", x.len(), y.len())));
        }
        Self::new(
            x.iter()
                .zip(y)
                .enumerate()
                .map(|(i, (&objective, &subjective))| Pair {
                    content: i.to_string(),
                    objective,
                    subjective,
                })
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }
}

/// Sample Pearson linear correlation coefficient.
pub fn plcc(obs: &PairedObservations) -> Result<f64> {
    let n = obs.pairs.len() as f64;
    let mx = obs.pairs.iter().map(|p| p.objective).sum::<f64>() / n;
    let my = obs.pairs.iter().map(|p| p.subjective).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in &obs.pairs {
        let (dx, dy) = (p.objective - mx, p.subjective - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(format!(
            "zero variance in the {} vector",
            if sxx == 0.0 { "objective" } else { "subjective" }
        )));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub plcc: Option<f64>,
    pub n_contents: usize,
    pub objective_aggregation: String,
    pub caveats: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContentRow {
    pub content: String,
    pub objective: f64,
    pub n_subjects: usize,
    pub mean_subjective: Option<f64>,
}

/// Per-content mean of subjective totals, keyed by content id.
pub fn mean_subjective(ssq: &[SsqRecord]) -> BTreeMap<String, (usize, f64)> {
    let mut acc: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for r in ssq {
        let e = acc.entry(r.content.clone()).or_default();
        e.0 += 1;
        e.1 += r.score.total;
    }
    acc.into_iter().map(|(k, (n, s))| (k, (n, s / n as f64))).collect()
}

/// Joins objective aggregates with subjective means, rejecting ids that
/// appear on only one side.
pub fn join_contents(series: &[ScoreSeries], ssq: &[SsqRecord], method: Aggregation) -> Result<Vec<ContentRow>> {
    let mut seen = BTreeSet::new();
    for s in series {
        if !seen.insert(s.video_id.as_str()) {
            return Err(Error::Validation(format!("duplicate score series for `{}`", s.video_id)));
        }
    }
    let subj = mean_subjective(ssq);
    if !ssq.is_empty() {
        let videos: BTreeSet<&str> = series.iter().map(|s| s.video_id.as_str()).collect();
        let rated: BTreeSet<&str> = subj.keys().map(String::as_str).collect();
        let no_ssq: Vec<&str> = videos.difference(&rated).copied().collect();
        let no_video: Vec<&str> = rated.difference(&videos).copied().collect();
        if !no_ssq.is_empty() || !no_video.is_empty() {
            return Err(Error::Validation(format!(
                "content ids do not match; videos without SSQ: [{}]; SSQ contents without video: [{}]",
                no_ssq.join(", "),
                no_video.join(", ")
            )));
        }
    }
    let mut rows = series
        .iter()
        .map(|s| {
            let sub = subj.get(&s.video_id);
            Ok(ContentRow {
                content: s.video_id.clone(),
                objective: aggregate(s, method)?,
                n_subjects: sub.map_or(0, |v| v.0),
                mean_subjective: sub.map(|v| v.1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.content.cmp(&b.content));
    Ok(rows)
}

/// Correlation summary for already-joined rows.
pub fn summarize_rows(rows: &[ContentRow], method: Aggregation) -> ReportSummary {
    let mut caveats = Vec::new();
    let pairs: Vec<Pair> = rows
        .iter()
        .filter_map(|r| {
            r.mean_subjective.map(|s| Pair {
                content: r.content.clone(),
                objective: r.objective,
                subjective: s,
            })
        })
        .collect();
    let n = if pairs.is_empty() { rows.len() } else { pairs.len() };
    let plcc_value = if pairs.is_empty() {
        caveats.push("correlation unavailable: no SSQ scores were supplied".to_string());
        None
    } else {
        match PairedObservations::new(pairs).and_then(|o| plcc(&o)) {
            Ok(r) => Some(r),
            Err(e) => {
                caveats.push(format!("correlation unavailable: {e}"));
                None
            }
        }
    };
    if plcc_value.is_some() && n < SMALL_SAMPLE {
        caveats.push(format!(
            "small sample: PLCC computed over only {n} contents; treat it as descriptive, not as evidence of agreement"
        ));
    }
    ReportSummary {
        plcc: plcc_value,
        n_contents: n,
        objective_aggregation: method.label(),
        caveats,
    }
}

fn safe_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Writes per-video score curves, the per-content SSQ summary, the PLCC
/// summary JSON and a plain-text table into `out_dir`. Returns the summary
/// and the files written.
pub fn emit_report(
    series: &[ScoreSeries],
    ssq: &[SsqRecord],
    method: Aggregation,
    out_dir: &Path,
) -> Result<(ReportSummary, Vec<PathBuf>)> {
    let rows = join_contents(series, ssq, method)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut sorted: Vec<&ScoreSeries> = series.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    for s in sorted {
        let p = out_dir.join(format!("{}_scores.csv", safe_file_stem(&s.video_id)));
        fs::write(&p, series_to_csv(s))?;
        written.push(p);
    }
    let (summary, rest) = emit_rows_report(&rows, method, out_dir)?;
    written.extend(rest);
    Ok((summary, written))
}

/// Summary files for rows whose objective aggregates are already known:
/// `ssq_summary.csv`, `summary.json` and `report.txt`.
pub fn emit_rows_report(rows: &[ContentRow], method: Aggregation, out_dir: &Path) -> Result<(ReportSummary, Vec<PathBuf>)> {
    let summary = summarize_rows(rows, method);
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut ssq_csv = String::from("content,n_subjects,mean_total,label\n");
    for r in rows.iter().filter(|r| r.mean_subjective.is_some()) {
        let m = r.mean_subjective.unwrap_or_default();
        let _ = writeln!(ssq_csv, "{},{},{},{}", r.content, r.n_subjects, m, classify_total(m).as_str());
    }
    let p = out_dir.join("ssq_summary.csv");
    fs::write(&p, ssq_csv)?;
    written.push(p);

    let p = out_dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(&p, json)?;
    written.push(p);

    let p = out_dir.join("report.txt");
    fs::write(&p, render_table(rows, &summary))?;
    written.push(p);
    Ok((summary, written))
}

fn render_table(rows: &[ContentRow], summary: &ReportSummary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "Exceptional motion vs. subjective SSQ");
    let _ = writeln!(t, "objective aggregation: {}", summary.objective_aggregation);
    let _ = writeln!(t);
    let _ = writeln!(t, "{:<24} {:>14} {:>10} {:>12}  {}", "content", "motion score", "subjects", "mean SSQ", "label");
    for r in rows {
        let (subj, label) = match r.mean_subjective {
            Some(m) => (format!("{m:.2}"), classify_total(m).as_str()),
            None => ("-".to_string(), "-"),
        };
        let _ = writeln!(t, "{:<24} {:>14.6} {:>10} {:>12}  {}", r.content, r.objective, r.n_subjects, subj, label);
    }
    let _ = writeln!(t);
    let _ = writeln!(
        t,
        "perceptible-sickness band: total SSQ {}-{} (label fires at {})",
        SICKNESS_BAND.0, SICKNESS_BAND.1, SICKNESS_BAND.0
    );
    match summary.plcc {
        Some(r) => {
            let _ = writeln!(t, "PLCC (n = {}): {r:.6}", summary.n_contents);
        }
        None => {
            let _ = writeln!(t, "PLCC: unavailable");
        }
    }
    for c in &summary.caveats {
        let _ = writeln!(t, "caveat: {c}");
    }
    t
}
