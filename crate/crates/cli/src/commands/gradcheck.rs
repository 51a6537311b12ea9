use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use exmo_core::gradcheck::{check_all, format_table, Precision};
use serde::Serialize;

use super::{ensure_dir, parse_setting, Context};
use crate::error::{CliResult, EXIT_CHECK_FAILED};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// `single`, `double` or `both`.
    #[arg(long)]
    pub precision: Option<String>,
    /// Optional directory for `gradcheck.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct GradcheckSettings {
    precisions: Vec<Precision>,
}

pub fn run(ctx: &Context, a: &GradcheckArgs) -> CliResult<i32> {
    let p = a
        .precision
        .clone()
        .or_else(|| ctx.file.gradcheck.precision.clone())
        .unwrap_or_else(|| "both".into());
    let precisions = if p.eq_ignore_ascii_case("both") {
        vec![Precision::Double, Precision::Single]
    } else {
        vec![parse_setting::<Precision>(&p, "precision")?]
    };
    let mut rows = Vec::new();
    for &prec in &precisions {
        rows.extend(check_all(prec, ctx.seed)?);
    }
    print!("{}", format_table(&rows));
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let mut csv = String::from("operator,precision,coordinates,max_rel_error,threshold,passed\n");
        for r in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.operator,
                r.precision.as_str(),
                r.coordinates,
                r.max_rel_error,
                r.threshold,
                r.passed
            );
        }
        fs::write(dir.join("gradcheck.csv"), csv)?;
        ctx.record("gradcheck", GradcheckSettings { precisions }).write(&dir.join("gradcheck.run.json"))?;
    }
    Ok(if rows.iter().all(|r| r.passed) { 0 } else { EXIT_CHECK_FAILED })
}
