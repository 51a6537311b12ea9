use std::fs;
use std::path::PathBuf;

use clap::Args;
use exmo_core::data::{write_frame_dir, ManifestEntry, Role};
use exmo_core::synthcam::{generate, mean_interframe_difference, Motion, SynthSpec, Texture};
use serde::Serialize;

use super::{ensure_dir, parse_setting, Context};
use crate::config::pick;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Velocities in px/frame (degrees/frame when rotating), e.g. `1,2,4,8`.
    #[arg(long, value_delimiter = ',')]
    pub velocity: Option<Vec<f64>>,
    /// `checker`, `noise` or `gradient`.
    #[arg(long)]
    pub texture: Option<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Frame width and height.
    #[arg(long)]
    pub size: Option<usize>,
    /// `translate` or `rotate`.
    #[arg(long)]
    pub motion: Option<String>,
    /// Role recorded for the clips in the generated manifest.
    #[arg(long, default_value = "test")]
    pub role: String,
    /// Output directory; one frame directory per clip plus `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct SynthSettings {
    specs: Vec<SynthSpec>,
    role: Role,
}

fn parse_role(s: &str) -> CliResult<Role> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| CliError::usage(format!("invalid role `{s}`: expected pretrain, finetune or test")))
}

pub fn run(ctx: &Context, a: &SynthArgs) -> CliResult<i32> {
    let f = &ctx.file.synth;
    let velocities = a
        .velocity
        .clone()
        .or_else(|| f.velocities.clone())
        .ok_or_else(|| CliError::usage("--velocity is required (e.g. --velocity 1,2,4,8)"))?;
    let texture: Texture = parse_setting(&pick(a.texture.clone(), f.texture.clone(), "noise".into()), "texture")?;
    let motion: Motion = parse_setting(&pick(a.motion.clone(), f.motion.clone(), "translate".into()), "motion")?;
    let role = parse_role(&a.role)?;
    let specs: Vec<SynthSpec> = velocities
        .iter()
        .map(|&v| SynthSpec {
            texture,
            velocity: v,
            n_frames: pick(a.frames, f.frames, 30),
            size: pick(a.size, f.size, 128),
            seed: ctx.seed,
            motion,
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }

    ensure_dir(&a.out)?;
    let mut entries = Vec::with_capacity(specs.len());
    for spec in &specs {
        let seq = generate(spec)?;
        let id = spec.source_id();
        write_frame_dir(&seq, &a.out.join(&id))?;
        println!("{id}\tmean |dI| = {:.6}", mean_interframe_difference(&seq));
        entries.push(ManifestEntry { path: PathBuf::from(&id), role, label: Some(id) });
    }
    let mut json = serde_json::to_string_pretty(&entries)?;
    json.push('\n');
    fs::write(a.out.join("manifest.json"), json)?;
    ctx.record("synth", SynthSettings { specs, role }).write(&a.out.join("synth.run.json"))?;
    Ok(0)
}
