use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use exmo_core::autoencoder::{save_model, train, Model, NetworkConfig, Phase, TrainPlan};
use exmo_core::data::{
    half_resize_crop_stacks, half_resize_random_crop, load_frames, resize, temporal_augment, window_stacks,
    FrameSequence, FrameStack, Manifest, Role, STACK_FRAMES, STACK_SIZE,
};
use exmo_core::optim::AdamConfig;
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{require_exists, Context};
use crate::config::pick;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest (JSON list of {path, role, label}).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model file to write; the loss history and run record go next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Channels of the first encoder stage.
    #[arg(long)]
    pub base: Option<usize>,
    /// Epochs for both phases (overridden per phase by the options below).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    /// Cap on optimizer steps per phase.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Temporal strides for augmentation, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    pub strides: Option<Vec<usize>>,
    /// Frames between consecutive training windows.
    #[arg(long)]
    pub window_step: Option<usize>,
    /// Write a checkpoint every this many steps.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Draw a fresh crop offset per stack instead of one per clip (fine-tune data).
    #[arg(long)]
    pub per_stack_crop: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSettings {
    pub manifest: PathBuf,
    pub model: PathBuf,
    pub network: NetworkConfig,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub strides: Vec<usize>,
    pub window_step: usize,
    pub checkpoint_every: Option<usize>,
    pub per_stack_crop: bool,
}

#[derive(Debug, Serialize)]
struct PhaseSummary {
    phase: &'static str,
    stacks: usize,
    steps: usize,
    final_loss: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TrainRecord {
    #[serde(flatten)]
    settings: TrainSettings,
    phases: Vec<PhaseSummary>,
}

fn settings(ctx: &Context, a: &TrainArgs) -> CliResult<TrainSettings> {
    let f = &ctx.file.train;
    let defaults = TrainPlan::default();
    let both = a.epochs.or(f.epochs);
    let adam = AdamConfig {
        lr: pick(a.lr, f.lr, AdamConfig::default().lr),
        beta1: f.beta1.unwrap_or(AdamConfig::default().beta1),
        beta2: f.beta2.unwrap_or(AdamConfig::default().beta2),
        eps: f.eps.unwrap_or(AdamConfig::default().eps),
    };
    let s = TrainSettings {
        manifest: a.manifest.clone(),
        model: a.out.clone(),
        network: NetworkConfig::with_base(pick(a.base, ctx.file.network.base_channels, 16), ctx.seed),
        pretrain_epochs: a.pretrain_epochs.or(f.pretrain_epochs).or(both).unwrap_or(defaults.epochs),
        finetune_epochs: a.finetune_epochs.or(f.finetune_epochs).or(both).unwrap_or(defaults.epochs),
        max_steps: a.max_steps.or(f.max_steps),
        batch_size: pick(a.batch_size, f.batch_size, defaults.batch_size),
        adam,
        strides: pick(a.strides.clone(), f.strides.clone(), vec![1, 2, 3]),
        window_step: pick(a.window_step, f.window_step, 1),
        checkpoint_every: a.checkpoint_every.or(f.checkpoint_every),
        per_stack_crop: a.per_stack_crop || f.per_stack_crop.unwrap_or(false),
    };
    s.network.validate().map_err(CliError::from)?;
    if s.batch_size == 0 {
        return Err(CliError::usage("--batch-size must be at least 1"));
    }
    if s.window_step == 0 {
        return Err(CliError::usage("--window-step must be at least 1"));
    }
    if s.strides.is_empty() || s.strides.contains(&0) {
        return Err(CliError::usage("--strides must be a non-empty list of positive integers"));
    }
    if !(s.adam.lr.is_finite() && s.adam.lr > 0.0) {
        return Err(CliError::usage(format!("--lr must be positive, got {}", s.adam.lr)));
    }
    Ok(s)
}

fn windows(seqs: &[FrameSequence], step: usize, out: &mut Vec<FrameStack>) -> CliResult<()> {
    for s in seqs.iter().filter(|s| s.len() >= STACK_FRAMES) {
        out.extend(window_stacks(s, STACK_FRAMES, step)?);
    }
    Ok(())
}

fn to_stack_size(seq: &FrameSequence) -> CliResult<FrameSequence> {
    match seq.dims() {
        Some((w, h)) if (w, h) == (STACK_SIZE, STACK_SIZE) => Ok(seq.clone()),
        _ => Ok(resize(seq, STACK_SIZE, STACK_SIZE)?),
    }
}

/// Loads every clip with `role` and turns it into 128×128 training stacks.
/// Pre-train clips are resized; fine-tune clips are halved and cropped.
pub fn prepare_stacks(
    manifest: &Manifest,
    role: Role,
    s: &TrainSettings,
    rng: &mut ChaCha8Rng,
) -> CliResult<Vec<FrameStack>> {
    let mut stacks = Vec::new();
    for entry in manifest.with_role(role) {
        let seq = load_frames(&entry.path)?;
        let (w, h) = seq.dims().unwrap_or((0, 0));
        let can_crop = w / 2 >= STACK_SIZE && h / 2 >= STACK_SIZE;
        let before = stacks.len();
        match role {
            Role::Finetune if can_crop && s.per_stack_crop => {
                for sub in temporal_augment(&seq, &s.strides).iter().filter(|x| x.len() >= STACK_FRAMES) {
                    stacks.extend(half_resize_crop_stacks(sub, s.window_step, rng)?);
                }
            }
            Role::Finetune if can_crop => {
                let cropped = half_resize_random_crop(&seq, rng)?;
                windows(&temporal_augment(&cropped, &s.strides), s.window_step, &mut stacks)?;
            }
            _ => {
                if role == Role::Finetune {
                    warn!(
                        "{}: {w}x{h} is too small to halve and crop to {STACK_SIZE}x{STACK_SIZE}; resizing instead",
                        entry.path.display()
                    );
                }
                let sized = to_stack_size(&seq)?;
                windows(&temporal_augment(&sized, &s.strides), s.window_step, &mut stacks)?;
            }
        }
        info!("{}: {} frames -> {} stacks", entry.path.display(), seq.len(), stacks.len() - before);
    }
    Ok(stacks)
}

fn sibling(model: &Path, suffix: &str) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    model.with_file_name(format!("{stem}.{suffix}"))
}

pub fn run(ctx: &Context, a: &TrainArgs) -> CliResult<i32> {
    require_exists(&a.manifest, "manifest")?;
    let s = settings(ctx, a)?;
    let manifest = Manifest::load(&a.manifest)?;
    let out_dir = match a.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&out_dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let pre = prepare_stacks(&manifest, Role::Pretrain, &s, &mut rng)?;
    let fine = prepare_stacks(&manifest, Role::Finetune, &s, &mut rng)?;
    if pre.is_empty() && fine.is_empty() {
        return Err(CliError::usage(format!(
            "manifest {} yields no training stacks (need pretrain or finetune clips of at least {STACK_FRAMES} frames)",
            a.manifest.display()
        )));
    }

    let mut model = Model::build(s.network)?;
    let mut csv = String::from("phase,step,loss\n");
    let mut phases = Vec::new();
    let mut global = 0usize;
    for (phase, data, epochs, shuffle_seed) in [
        (Phase::Pretrain, &pre, s.pretrain_epochs, ctx.seed),
        (Phase::Finetune, &fine, s.finetune_epochs, ctx.seed.wrapping_add(1)),
    ] {
        if data.is_empty() {
            info!("{}: no stacks, phase skipped", phase.as_str());
            continue;
        }
        let mut batch_size = s.batch_size;
        if data.len() < batch_size {
            warn!("{}: only {} stacks; batch size reduced from {batch_size}", phase.as_str(), data.len());
            batch_size = data.len();
        }
        let plan = TrainPlan {
            phase,
            epochs,
            max_steps: s.max_steps,
            batch_size,
            adam: s.adam,
            shuffle_seed,
            checkpoint_every: s.checkpoint_every,
            checkpoint_dir: s.checkpoint_every.map(|_| out_dir.clone()),
        };
        let report = train(&mut model, data, &plan)?;
        for l in &report.losses {
            let _ = writeln!(csv, "{},{global},{l}", phase.as_str());
            global += 1;
        }
        info!(
            "{}: {} steps, final loss {}",
            phase.as_str(),
            report.losses.len(),
            report.losses.last().map_or("n/a".to_string(), |l| format!("{l:.6}"))
        );
        phases.push(PhaseSummary {
            phase: phase.as_str(),
            stacks: data.len(),
            steps: report.losses.len(),
            final_loss: report.losses.last().copied(),
        });
    }

    save_model(&model, &a.out)?;
    fs::write(sibling(&a.out, "loss.csv"), csv)?;
    ctx.record("train", TrainRecord { settings: s, phases }).write(&sibling(&a.out, "run.json"))?;
    println!("wrote {}", a.out.display());
    Ok(0)
}
