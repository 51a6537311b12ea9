use std::path::PathBuf;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model_file::save_model;
use super::network::Model;
use crate::error::{Error, Result};
use crate::ops::{euclidean_loss, FilterBank};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub phase: Phase,
    pub epochs: usize,
    /// Caps the run at this many optimizer steps, overriding `epochs`.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seed for the per-epoch shuffle of sample order.
    pub shuffle_seed: u64,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainPlan {
    fn default() -> Self {
        Self {
            phase: Phase::Pretrain,
            epochs: 20,
            max_steps: None,
            batch_size: 8,
            adam: AdamConfig::default(),
            shuffle_seed: 0,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainPlan {
    pub fn steps_for(&self, n_samples: usize) -> usize {
        let per_epoch = n_samples.div_ceil(self.batch_size.max(1));
        self.max_steps.unwrap_or(self.epochs * per_epoch)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub last_checkpoint: Option<PathBuf>,
}

/// Loss and per-layer gradients for one mini-batch. Items are processed in
/// parallel and reduced in index order, so the result does not depend on the
/// number of worker threads.
pub fn batch_gradients<S>(model: &Model, batch: &[&S]) -> Result<(f64, Vec<FilterBank<f32>>)>
where
    S: AsRef<Tensor<f32>> + Sync,
{
    let caches = batch
        .par_iter()
        .map(|s| model.forward_cached(s.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<&Tensor<f32>> = batch.iter().map(|s| s.as_ref()).collect();
    let outputs: Vec<&Tensor<f32>> = caches.iter().map(|c| c.output()).collect();
    let loss = euclidean_loss(&inputs, &outputs)?;
    if !loss.value.is_finite() {
        return Ok((loss.value, Vec::new()));
    }
    let per_item = caches
        .par_iter()
        .zip(loss.grads.par_iter())
        .map(|(c, g)| model.backward(c, g))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = per_item.into_iter();
    let mut total = iter.next().expect("non-empty batch");
    for item in iter {
        for (acc, g) in total.iter_mut().zip(&item) {
            acc.add_assign(g)?;
        }
    }
    Ok((loss.value, total))
}

/// Mean Euclidean loss over `data` without updating the model.
pub fn evaluate_loss<S>(model: &Model, data: &[S]) -> Result<f64>
where
    S: AsRef<Tensor<f32>> + Sync,
{
    if data.is_empty() {
        return Err(Error::Argument("evaluate_loss: no samples".into()));
    }
    let outs = data
        .par_iter()
        .map(|s| model.forward(s.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<&Tensor<f32>> = data.iter().map(|s| s.as_ref()).collect();
    Ok(euclidean_loss(&inputs, &outs)?.value)
}

/// Minimises the Euclidean reconstruction loss over `data` with mini-batch
/// Adam. The model is updated in place and its training metadata extended.
pub fn train<S>(model: &mut Model, data: &[S], plan: &TrainPlan) -> Result<TrainReport>
where
    S: AsRef<Tensor<f32>> + Sync,
{
    if plan.batch_size == 0 {
        return Err(Error::Argument("batch_size must be at least 1".into()));
    }
    if data.len() < plan.batch_size {
        return Err(Error::Argument(format!(
            "need at least batch_size = {} stacks, got {}",
            plan.batch_size,
            data.len()
        )));
    }
    let total_steps = plan.steps_for(data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.shuffle_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut state = AdamState::new();
    let mut report = TrainReport::default();
    info!(
        "{} phase: {} samples, {} steps, batch {}",
        plan.phase.as_str(),
        data.len(),
        total_steps,
        plan.batch_size
    );

    for step in 0..total_steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
            if step > 0 {
                model.meta.epochs_seen += 1;
            }
        }
        let end = (cursor + plan.batch_size).min(order.len());
        let mut idx = order[cursor..end].to_vec();
        cursor = end;
        idx.sort_unstable();
        let batch: Vec<&S> = idx.iter().map(|&i| &data[i]).collect();

        let (loss, grads) = batch_gradients(model, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Training {
                step,
                message: format!("loss is {loss}"),
                last_checkpoint: report.last_checkpoint.clone(),
            });
        }
        model.set_grads(&grads)?;
        adam_step(model.params_mut(), &mut state, &plan.adam).map_err(|e| match e {
            Error::Training { message, .. } => Error::Training {
                step,
                message,
                last_checkpoint: report.last_checkpoint.clone(),
            },
            other => other,
        })?;
        model.meta.steps += 1;
        model.meta.loss_history.push(loss as f32);
        report.losses.push(loss);
        debug!("step {step}: loss {loss:.6}");

        if let (Some(every), Some(dir)) = (plan.checkpoint_every, plan.checkpoint_dir.as_ref()) {
            if every > 0 && (step + 1) % every == 0 {
                let path = dir.join(format!("{}-step{:06}.exmo", plan.phase.as_str(), step + 1));
                save_model(model, &path)?;
                report.last_checkpoint = Some(path);
            }
        }
    }
    if total_steps > 0 && cursor >= order.len() {
        model.meta.epochs_seen += 1;
    }
    for p in model.params_mut() {
        p.clear_grad();
    }
    Ok(report)
}
