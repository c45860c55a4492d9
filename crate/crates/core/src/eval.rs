//! Majority-vote kNN evaluation and the neighbor-size / resetting ablation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::top_k_excluding;
use crate::data::LabeledDataset;
use crate::encoder::MlpEncoder;
use crate::error::{Result, SuvrError};
use crate::neighbors::Strategy;
use crate::numeric::{self, Matrix};
use crate::train::{fit, ResetPolicy, TrainConfig};

pub const DEFAULT_K_EVAL: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k_eval: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_eval: DEFAULT_K_EVAL,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_eval < 1 {
            return Err(SuvrError::config("eval.k_eval", "must be >= 1"));
        }
        Ok(())
    }
}

/// Label voted by the `k_eval` training embeddings most similar to `v`.
///
/// Ties in vote count go to the label with the larger summed similarity,
/// then to the smaller label id.
pub fn knn_predict(train: &Matrix, labels: &[usize], v: &[f64], k_eval: usize) -> Result<usize> {
    if train.rows() == 0 {
        return Err(SuvrError::InvalidArgument("kNN over an empty training set".into()));
    }
    numeric::check_len(train.rows(), labels.len())?;
    let scores = train.mul_vec(v)?;
    let nearest = top_k_excluding(&scores, k_eval, &[])?;
    let mut votes: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for i in nearest {
        let e = votes.entry(labels[i]).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += scores[i];
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (label, (count, sim)) in votes {
        let better = match best {
            None => true,
            Some((_, bc, bs)) => count > bc || (count == bc && sim > bs),
        };
        if better {
            best = Some((label, count, sim));
        }
    }
    Ok(best.expect("k_eval >= 1 casts a vote").0)
}

/// Fraction of `test` instances whose kNN vote over `train_embeddings`
/// matches their label. Test features go through `encoder` first.
pub fn evaluate(
    encoder: &MlpEncoder,
    train_embeddings: &Matrix,
    train_labels: &[usize],
    test: &LabeledDataset,
    cfg: &EvalConfig,
) -> Result<f64> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(SuvrError::InvalidArgument("empty test set".into()));
    }
    let truth = test
        .labels()
        .ok_or_else(|| SuvrError::InvalidArgument(format!("test set {} has no labels", test.name())))?;
    numeric::check_len(encoder.input_dim(), test.dim())?;
    let mut correct = 0usize;
    for (x, &label) in test.features().iter_rows().zip(truth) {
        let v = encoder.embed(x)?;
        if knn_predict(train_embeddings, train_labels, &v, cfg.k_eval)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Trains on `train` and scores `test`, using the final bank rows as the
/// retrieval targets.
pub fn fit_and_evaluate(train: &LabeledDataset, test: &LabeledDataset, cfg: &TrainConfig, eval: &EvalConfig) -> Result<f64> {
    let labels = train
        .labels()
        .ok_or_else(|| SuvrError::InvalidArgument(format!("training set {} has no labels to vote with", train.name())))?;
    let out = fit(train.features(), cfg)?;
    evaluate(out.trainer.encoder(), out.trainer.bank().embeddings(), labels, test, eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub strategies: Vec<Strategy>,
    pub ks: Vec<usize>,
    pub resets: Vec<ResetPolicy>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid {
            strategies: Strategy::ALL.to_vec(),
            ks: vec![1, 2, 4, 8],
            resets: vec![ResetPolicy::EveryStep],
        }
    }
}

impl AblationGrid {
    fn cells(&self) -> Vec<(Strategy, usize, ResetPolicy)> {
        let mut out = Vec::new();
        for &s in &self.strategies {
            for &k in &self.ks {
                for &r in &self.resets {
                    out.push((s, k, r));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub strategy: Strategy,
    pub k: usize,
    pub m: usize,
    pub reset_policy: ResetPolicy,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
}

/// The negative count used for a grid cell: the base `m`, capped below `k`.
pub fn cell_negatives(base_m: usize, k: usize) -> usize {
    base_m.min(k.saturating_sub(1))
}

/// Fits and evaluates every (strategy, k, reset) cell once per seed.
/// Cells run in parallel; results are identical to a sequential run.
pub fn ablate(
    train: &LabeledDataset,
    test: &LabeledDataset,
    base: &TrainConfig,
    eval: &EvalConfig,
    grid: &AblationGrid,
    seeds: &[u64],
) -> Result<Vec<AblationCell>> {
    if grid.strategies.is_empty() || grid.ks.is_empty() || grid.resets.is_empty() || seeds.is_empty() {
        return Err(SuvrError::config("ablate", "grid axes and seed list must be non-empty"));
    }
    let cells = grid.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let accuracies: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (strategy, k, reset_policy) = cells[c];
            let cfg = TrainConfig {
                strategy,
                k,
                m: cell_negatives(base.m, k),
                reset_policy,
                seed,
                ..base.clone()
            };
            fit_and_evaluate(train, test, &cfg, eval)
        })
        .collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(strategy, k, reset_policy))| {
            let accs = accuracies[c * seeds.len()..(c + 1) * seeds.len()].to_vec();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
            AblationCell {
                strategy,
                k,
                m: cell_negatives(base.m, k),
                reset_policy,
                seeds: seeds.to_vec(),
                accuracies: accs,
                mean,
                std: var.sqrt(),
            }
        })
        .collect())
}
