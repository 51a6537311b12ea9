use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{Model, NetworkConfig};
use super::train::{evaluate_loss, train, TrainPlan};
use crate::data::{window_stacks, FrameSequence, FrameStack, STACK_FRAMES};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_sequences: Vec<usize>,
    pub test_sequences: Vec<usize>,
    pub final_train_loss: Option<f64>,
    /// Mean per-stack Euclidean loss over the held-out stacks.
    pub mean_test_error: f64,
}

/// Splits `0..n` into `folds` disjoint test sets after a seeded shuffle.
/// Fold sizes differ by at most one.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Argument(format!(
            "{n} sequences cannot be split into {folds} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (q, r) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut at = 0;
    for f in 0..folds {
        let len = q + usize::from(f < r);
        let mut part = idx[at..at + len].to_vec();
        part.sort_unstable();
        out.push(part);
        at += len;
    }
    Ok(out)
}

fn stacks_of(dataset: &[FrameSequence], which: &[usize], step: usize) -> Result<Vec<FrameStack>> {
    let mut out = Vec::new();
    for &i in which {
        if dataset[i].len() >= STACK_FRAMES {
            out.extend(window_stacks(&dataset[i], STACK_FRAMES, step)?);
        }
    }
    Ok(out)
}

/// K-fold cross validation over whole sequences. Each fold trains a fresh
/// model from `config` on the other folds and reports the mean held-out loss.
pub fn cross_validate(
    dataset: &[FrameSequence],
    config: NetworkConfig,
    plan: &TrainPlan,
    folds: usize,
    window_step: usize,
) -> Result<Vec<FoldReport>> {
    let parts = fold_partition(dataset.len(), folds, config.seed)?;
    let mut reports = Vec::with_capacity(folds);
    for (f, test) in parts.iter().enumerate() {
        let train_idx: Vec<usize> = (0..dataset.len()).filter(|i| !test.contains(i)).collect();
        let train_stacks = stacks_of(dataset, &train_idx, window_step)?;
        let test_stacks = stacks_of(dataset, test, window_step)?;
        if test_stacks.is_empty() {
            return Err(Error::Argument(format!("fold {f} has no test stacks")));
        }
        let mut model = Model::build(config)?;
        let rep = train(&mut model, &train_stacks, plan)?;
        let mean_test_error = evaluate_loss(&model, &test_stacks)?;
        info!("fold {f}: mean test error {mean_test_error:.6}");
        reports.push(FoldReport {
            fold: f,
            train_sequences: train_idx,
            test_sequences: test.clone(),
            final_train_loss: rep.losses.last().copied(),
            mean_test_error,
        });
    }
    Ok(reports)
}
