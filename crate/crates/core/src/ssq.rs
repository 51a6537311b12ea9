//! Simulator Sickness Questionnaire scoring.
//!
//! Sixteen symptoms are rated 0 (None) to 3 (Severe). Each symptom feeds the
//! Nausea, Oculomotor and Disorientation clusters marked for it below. The
//! default total is `3.74 × Σ ratings`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOTAL_WEIGHT: f64 = 3.74;
pub const N_SYMPTOMS: usize = 16;

/// Lower and upper end of the total-score band taken to indicate perceptible
/// cybersickness.
pub const SICKNESS_BAND: (f64, f64) = (32.0, 40.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Symptom {
    pub name: &'static str,
    pub nausea: bool,
    pub oculomotor: bool,
    pub disorientation: bool,
}

const fn sym(name: &'static str, n: bool, o: bool, d: bool) -> Symptom {
    Symptom {
        name,
        nausea: n,
        oculomotor: o,
        disorientation: d,
    }
}

/// Questionnaire items in sheet order with their cluster marks.
/// "Fullness of head" carries no mark and only counts toward the total.
pub const SYMPTOMS: [Symptom; N_SYMPTOMS] = [
    sym("General discomfort", true, true, false),
    sym("Fatigue", false, true, false),
    sym("Headache", false, true, false),
    sym("Eye strain", false, true, false),
    sym("Difficulty focusing", false, true, false),
    sym("Increased salivation", true, false, true),
    sym("Sweating", true, false, false),
    sym("Nausea", true, false, false),
    sym("Difficulty concentrating", true, true, true),
    sym("Fullness of head", false, false, false),
    sym("Blurred vision", false, true, true),
    sym("Dizzy (Eyes open)", false, false, true),
    sym("Dizzy (Eye closed)", false, false, true),
    sym("Vertigo", false, false, true),
    sym("Stomach awareness", true, false, true),
    sym("Burping", true, false, false),
];

pub fn symptom_index(name: &str) -> Option<usize> {
    SYMPTOMS.iter().position(|s| s.name.eq_ignore_ascii_case(name.trim()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposurePhase {
    Pre,
    Post,
}

impl FromStr for ExposurePhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pre" => Ok(ExposurePhase::Pre),
            "post" => Ok(ExposurePhase::Post),
            other => Err(Error::Validation(format!("phase must be `pre` or `post`, got `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsqResponse {
    pub subject: String,
    pub content: String,
    pub phase: ExposurePhase,
    pub ratings: [u8; N_SYMPTOMS],
}

impl SsqResponse {
    pub fn new(
        subject: impl Into<String>,
        content: impl Into<String>,
        phase: ExposurePhase,
        ratings: [u8; N_SYMPTOMS],
    ) -> Result<Self> {
        if let Some(i) = ratings.iter().position(|&r| r > 3) {
            return Err(Error::Validation(format!(
                "symptom `{}` rated {}, must be 0..=3",
                SYMPTOMS[i].name, ratings[i]
            )));
        }
        Ok(Self {
            subject: subject.into(),
            content: content.into(),
            phase,
            ratings,
        })
    }

    /// Builds a response from symptom-name → rating pairs; every symptom
    /// must be present exactly once.
    pub fn from_named(
        subject: impl Into<String>,
        content: impl Into<String>,
        phase: ExposurePhase,
        named: &BTreeMap<String, i64>,
    ) -> Result<Self> {
        let mut ratings = [0u8; N_SYMPTOMS];
        let mut seen = [false; N_SYMPTOMS];
        for (name, &r) in named {
            let i = symptom_index(name)
                .ok_or_else(|| Error::Validation(format!("unknown symptom `{name}`")))?;
            if !(0..=3).contains(&r) {
                return Err(Error::Validation(format!("symptom `{name}` rated {r}, must be 0..=3")));
            }
            ratings[i] = r as u8;
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("missing symptom `{}`", SYMPTOMS[i].name)));
        }
        Self::new(subject, content, phase, ratings)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TotalFormula {
    /// Single weight 3.74 applied to the sum of all sixteen ratings.
    #[default]
    Flat,
    /// Conventional weighting: 3.74 × (N + O + D) raw cluster sums. Not the
    /// default; kept for comparison only.
    Kennedy,
}

impl FromStr for TotalFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flat" => Ok(TotalFormula::Flat),
            "kennedy" => Ok(TotalFormula::Kennedy),
            other => Err(Error::Argument(format!("unknown SSQ formula `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SsqScore {
    pub nausea_raw: i32,
    pub oculomotor_raw: i32,
    pub disorientation_raw: i32,
    pub total: f64,
    /// Set when a pre/post difference had a negative component clamped to 0.
    pub clamped: bool,
}

pub fn score_response(resp: &SsqResponse) -> Result<SsqScore> {
    score_response_with(resp, TotalFormula::Flat)
}

pub fn score_response_with(resp: &SsqResponse, formula: TotalFormula) -> Result<SsqScore> {
    let mut s = SsqScore::default();
    let mut sum = 0i32;
    for (sym, &r) in SYMPTOMS.iter().zip(&resp.ratings) {
        if r > 3 {
            return Err(Error::Validation(format!("symptom `{}` rated {r}, must be 0..=3", sym.name)));
        }
        let r = r as i32;
        sum += r;
        if sym.nausea {
            s.nausea_raw += r;
        }
        if sym.oculomotor {
            s.oculomotor_raw += r;
        }
        if sym.disorientation {
            s.disorientation_raw += r;
        }
    }
    s.total = match formula {
        TotalFormula::Flat => TOTAL_WEIGHT * sum as f64,
        TotalFormula::Kennedy => {
            TOTAL_WEIGHT * (s.nausea_raw + s.oculomotor_raw + s.disorientation_raw) as f64
        }
    };
    Ok(s)
}

/// Post-exposure minus pre-exposure, componentwise. Negative components
/// are clamped to zero and flagged.
pub fn diff_pre_post(pre: &SsqScore, post: &SsqScore) -> SsqScore {
    let mut clamped = pre.clamped || post.clamped;
    let mut d = |a: i32, b: i32| {
        let v = b - a;
        if v < 0 {
            clamped = true;
        }
        v.max(0)
    };
    let nausea_raw = d(pre.nausea_raw, post.nausea_raw);
    let oculomotor_raw = d(pre.oculomotor_raw, post.oculomotor_raw);
    let disorientation_raw = d(pre.disorientation_raw, post.disorientation_raw);
    let mut total = post.total - pre.total;
    if total < 0.0 {
        clamped = true;
        total = 0.0;
    }
    SsqScore {
        nausea_raw,
        oculomotor_raw,
        disorientation_raw,
        total,
        clamped,
    }
}

/// [`diff_pre_post`] for full responses, requiring matching subject and content.
pub fn diff_responses(pre: &SsqResponse, post: &SsqResponse, formula: TotalFormula) -> Result<SsqScore> {
    if pre.subject != post.subject || pre.content != post.content {
        return Err(Error::Argument(format!(
            "pre ({}, {}) and post ({}, {}) responses belong to different subject/content",
            pre.subject, pre.content, post.subject, post.content
        )));
    }
    if pre.phase != ExposurePhase::Pre || post.phase != ExposurePhase::Post {
        return Err(Error::Argument("expected one pre and one post response".into()));
    }
    Ok(diff_pre_post(
        &score_response_with(pre, formula)?,
        &score_response_with(post, formula)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SicknessLabel {
    BelowThreshold,
    PerceptibleSickness,
}

impl SicknessLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SicknessLabel::BelowThreshold => "below-threshold",
            SicknessLabel::PerceptibleSickness => "perceptible-sickness",
        }
    }
}

/// Labels a total against the lower end of the 32–40 band.
pub fn classify_total(total: f64) -> SicknessLabel {
    if total >= SICKNESS_BAND.0 {
        SicknessLabel::PerceptibleSickness
    } else {
        SicknessLabel::BelowThreshold
    }
}

/// Human-readable label that always names the full band.
pub fn describe_total(total: f64) -> String {
    format!(
        "total {total:.2}: {} (perceptible-sickness band {}-{})",
        classify_total(total).as_str(),
        SICKNESS_BAND.0,
        SICKNESS_BAND.1
    )
}

/// One scored row: either a pre/post difference or a lone response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsqRecord {
    pub subject: String,
    pub content: String,
    pub score: SsqScore,
    /// True when no pre-exposure response was available.
    pub post_only: bool,
}

impl SsqRecord {
    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.score.clamped {
            f.push("clamped");
        }
        if self.post_only {
            f.push("post-only");
        }
        f.join(";")
    }
}

/// How subjective totals are formed from the responses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubjectiveMode {
    /// Post minus pre.
    #[default]
    Delta,
    /// Post-exposure response alone.
    RawPost,
}

impl FromStr for SubjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delta" => Ok(SubjectiveMode::Delta),
            "raw-post" | "post" => Ok(SubjectiveMode::RawPost),
            other => Err(Error::Argument(format!("unknown subjective mode `{other}`"))),
        }
    }
}

pub const RESPONSE_FIXED_COLUMNS: [&str; 3] = ["subject", "content", "phase"];

/// Parses `subject,content,phase,<16 symptom columns>`. Symptom columns are
/// matched by name, so their order in the file does not matter.
pub fn parse_responses_csv(text: &str) -> Result<Vec<SsqResponse>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    for (i, want) in RESPONSE_FIXED_COLUMNS.iter().enumerate() {
        if headers.get(i).map(|h| h.eq_ignore_ascii_case(want)) != Some(true) {
            return Err(Error::Validation(format!("column {} must be `{want}`", i + 1)));
        }
    }
    let mut col_of = [usize::MAX; N_SYMPTOMS];
    for (c, h) in headers.iter().enumerate().skip(3) {
        let i = symptom_index(h).ok_or_else(|| Error::Validation(format!("unknown symptom column `{h}`")))?;
        col_of[i] = c;
    }
    if let Some(i) = col_of.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Validation(format!("missing symptom column `{}`", SYMPTOMS[i].name)));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut ratings = [0u8; N_SYMPTOMS];
        for (i, &c) in col_of.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            ratings[i] = match cell.parse::<u8>() {
                Ok(v) if v <= 3 => v,
                _ => {
                    return Err(Error::Validation(format!(
                        "row {}: symptom `{}` has rating `{cell}`, must be 0..=3",
                        line + 2,
                        SYMPTOMS[i].name
                    )))
                }
            };
        }
        out.push(SsqResponse::new(&rec[0], &rec[1], rec[2].parse()?, ratings)?);
    }
    Ok(out)
}

/// CSV header line for response files.
pub fn responses_header() -> String {
    let mut cols: Vec<&str> = RESPONSE_FIXED_COLUMNS.to_vec();
    cols.extend(SYMPTOMS.iter().map(|s| s.name));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(&cols).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Serialises responses in the layout accepted by [`parse_responses_csv`].
pub fn responses_to_csv(responses: &[SsqResponse]) -> String {
    let mut out = responses_header();
    for r in responses {
        let phase = match r.phase {
            ExposurePhase::Pre => "pre",
            ExposurePhase::Post => "post",
        };
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        let mut row = vec![r.subject.clone(), r.content.clone(), phase.to_string()];
        row.extend(r.ratings.iter().map(u8::to_string));
        w.write_record(&row).expect("in-memory write");
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    }
    out
}

/// Pairs pre/post responses per (subject, content) and scores them.
/// Output is sorted by content, then subject.
pub fn score_all(responses: &[SsqResponse], formula: TotalFormula, mode: SubjectiveMode) -> Result<Vec<SsqRecord>> {
    let mut by_key: BTreeMap<(String, String), [Option<&SsqResponse>; 2]> = BTreeMap::new();
    for r in responses {
        let slot = by_key
            .entry((r.content.clone(), r.subject.clone()))
            .or_default();
        let i = r.phase as usize;
        if slot[i].is_some() {
            return Err(Error::Validation(format!(
                "duplicate {:?} response for subject {} content {}",
                r.phase, r.subject, r.content
            )));
        }
        slot[i] = Some(r);
    }
    let mut out = Vec::with_capacity(by_key.len());
    for ((content, subject), [pre, post]) in by_key {
        let post = post.ok_or_else(|| {
            Error::Validation(format!("subject {subject} content {content} has no post response"))
        })?;
        let (score, post_only) = match (mode, pre) {
            (SubjectiveMode::Delta, Some(pre)) => (diff_responses(pre, post, formula)?, false),
            (SubjectiveMode::Delta, None) => (score_response_with(post, formula)?, true),
            (SubjectiveMode::RawPost, _) => (score_response_with(post, formula)?, pre.is_none()),
        };
        out.push(SsqRecord {
            subject,
            content,
            score,
            post_only,
        });
    }
    Ok(out)
}

pub const SCORE_CSV_HEADER: &str = "subject,content,nausea_raw,oculomotor_raw,disorientation_raw,total,flags";

pub fn scores_to_csv(records: &[SsqRecord]) -> String {
    let mut out = format!("{SCORE_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.subject,
            r.content,
            r.score.nausea_raw,
            r.score.oculomotor_raw,
            r.score.disorientation_raw,
            r.score.total,
            r.flags()
        );
    }
    out
}

pub fn scores_from_csv(text: &str) -> Result<Vec<SsqRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != SCORE_CSV_HEADER {
        return Err(Error::Validation(format!("score CSV header must be `{SCORE_CSV_HEADER}`")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<i32> {
            rec[i].parse().map_err(|_| Error::Validation(format!("bad integer `{}`", &rec[i])))
        };
        let flags: Vec<&str> = rec[6].split(';').collect();
        out.push(SsqRecord {
            subject: rec[0].to_string(),
            content: rec[1].to_string(),
            score: SsqScore {
                nausea_raw: num(2)?,
                oculomotor_raw: num(3)?,
                disorientation_raw: num(4)?,
                total: rec[5].parse().map_err(|_| Error::Validation(format!("bad total `{}`", &rec[5])))?,
                clamped: flags.contains(&"clamped"),
            },
            post_only: flags.contains(&"post-only"),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(ratings: [u8; 16]) -> SsqResponse {
        SsqResponse::new("s1", "v1", ExposurePhase::Post, ratings).unwrap()
    }

    #[test]
    fn all_none() {
        let s = score_response(&resp([0; 16])).unwrap();
        assert_eq!((s.nausea_raw, s.oculomotor_raw, s.disorientation_raw), (0, 0, 0));
        assert_eq!(s.total, 0.0);
    }

    #[test]
    fn severe_headache() {
        let mut r = [0; 16];
        r[symptom_index("Headache").unwrap()] = 3;
        let s = score_response(&resp(r)).unwrap();
        assert_eq!((s.nausea_raw, s.oculomotor_raw, s.disorientation_raw), (0, 3, 0));
        assert!((s.total - 11.22).abs() < 1e-12);
    }

    #[test]
    fn all_severe() {
        let s = score_response(&resp([3; 16])).unwrap();
        assert!((s.total - 179.52).abs() < 1e-9);
        assert_eq!(classify_total(s.total), SicknessLabel::PerceptibleSickness);
    }

    #[test]
    fn cluster_marks_as_printed() {
        let count = |f: fn(&Symptom) -> bool| SYMPTOMS.iter().filter(|s| f(s)).count();
        assert_eq!(count(|s| s.nausea), 7);
        assert_eq!(count(|s| s.oculomotor), 7);
        assert_eq!(count(|s| s.disorientation), 7);
        let gd = SYMPTOMS[symptom_index("general discomfort").unwrap()];
        assert!(gd.nausea && gd.oculomotor && !gd.disorientation);
        let dc = SYMPTOMS[symptom_index("Difficulty concentrating").unwrap()];
        assert!(dc.nausea && dc.oculomotor && dc.disorientation);
        let fh = SYMPTOMS[symptom_index("Fullness of head").unwrap()];
        assert!(!fh.nausea && !fh.oculomotor && !fh.disorientation);
    }

    #[test]
    fn fullness_of_head_counts_only_in_total() {
        let mut r = [0; 16];
        r[9] = 2;
        let s = score_response(&resp(r)).unwrap();
        assert_eq!((s.nausea_raw, s.oculomotor_raw, s.disorientation_raw), (0, 0, 0));
        assert!((s.total - 7.48).abs() < 1e-12);
    }

    #[test]
    fn kennedy_mode_weights_cluster_sums() {
        let mut r = [0; 16];
        r[8] = 1; // all three clusters
        let s = score_response_with(&resp(r), TotalFormula::Kennedy).unwrap();
        assert!((s.total - 3.0 * 3.74).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_rating_names_symptom() {
        let mut r = [0; 16];
        r[3] = 4;
        match SsqResponse::new("a", "b", ExposurePhase::Pre, r) {
            Err(Error::Validation(m)) => assert!(m.contains("Eye strain")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn named_construction_requires_all_symptoms() {
        let mut m: BTreeMap<String, i64> = SYMPTOMS.iter().map(|s| (s.name.to_string(), 1)).collect();
        assert!(SsqResponse::from_named("a", "b", ExposurePhase::Pre, &m).is_ok());
        m.remove("Vertigo");
        match SsqResponse::from_named("a", "b", ExposurePhase::Pre, &m) {
            Err(Error::Validation(msg)) => assert!(msg.contains("Vertigo")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diff_examples() {
        let zero = SsqScore::default();
        let same = score_response(&resp([2; 16])).unwrap();
        let d = diff_pre_post(&same, &same);
        assert_eq!((d.nausea_raw, d.oculomotor_raw, d.disorientation_raw, d.total, d.clamped), (0, 0, 0, 0.0, false));

        let mut r = [0; 16];
        r[2] = 3;
        let post = score_response(&resp(r)).unwrap();
        let d = diff_pre_post(&zero, &post);
        assert!((d.total - 11.22).abs() < 1e-12 && !d.clamped);

        // nausea improves, oculomotor worsens
        let mut pre_r = [0; 16];
        pre_r[7] = 2;
        let mut post_r = [0; 16];
        post_r[1] = 3;
        let d = diff_pre_post(&score_response(&resp(pre_r)).unwrap(), &score_response(&resp(post_r)).unwrap());
        assert_eq!(d.nausea_raw, 0);
        assert_eq!(d.oculomotor_raw, 3);
        assert!(d.clamped);
    }

    #[test]
    fn diff_requires_same_ids() {
        let pre = SsqResponse::new("s1", "v1", ExposurePhase::Pre, [0; 16]).unwrap();
        let post = SsqResponse::new("s2", "v1", ExposurePhase::Post, [0; 16]).unwrap();
        assert!(matches!(diff_responses(&pre, &post, TotalFormula::Flat), Err(Error::Argument(_))));
    }

    #[test]
    fn threshold() {
        assert_eq!(classify_total(0.0), SicknessLabel::BelowThreshold);
        assert_eq!(classify_total(31.99), SicknessLabel::BelowThreshold);
        assert_eq!(classify_total(32.0), SicknessLabel::PerceptibleSickness);
        assert!(describe_total(33.0).contains("32-40"));
    }

    #[test]
    fn csv_round_trips() {
        let rs = vec![
            SsqResponse::new("s1", "v1", ExposurePhase::Pre, [0; 16]).unwrap(),
            SsqResponse::new("s1", "v1", ExposurePhase::Post, [1; 16]).unwrap(),
            SsqResponse::new("s2", "v1", ExposurePhase::Post, [2; 16]).unwrap(),
        ];
        let text = responses_to_csv(&rs);
        assert!(text.starts_with("subject,content,phase,General discomfort,"));
        assert_eq!(parse_responses_csv(&text).unwrap(), rs);

        let scored = score_all(&rs, TotalFormula::Flat, SubjectiveMode::Delta).unwrap();
        assert_eq!(scored.len(), 2);
        assert!(scored[1].post_only);
        let csv = scores_to_csv(&scored);
        assert!(csv.starts_with(SCORE_CSV_HEADER));
        assert_eq!(scores_from_csv(&csv).unwrap(), scored);
    }

    #[test]
    fn response_csv_errors() {
        let mut text = responses_header();
        text.push_str("s1,v1,pre,0,0,0,7,0,0,0,0,0,0,0,0,0,0,0,0\n");
        match parse_responses_csv(&text) {
            Err(Error::Validation(m)) => assert!(m.contains("Eye strain")),
            other => panic!("{other:?}"),
        }
        let short = "subject,content,phase,Fatigue\n";
        assert!(parse_responses_csv(short).is_err());
    }
}
