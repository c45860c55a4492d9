//! Training loop: per-instance neighbor discovery against a frozen bank,
//! three-term loss, backprop through the encoder, one Nesterov step per batch,
//! then EMA refresh of the batch's bank rows.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bank::{MemoryBank, DEFAULT_BANK_MOMENTUM};
use crate::encoder::{EncoderGrads, MlpEncoder, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};
use crate::error::{Result, SuvrError};
use crate::neighbors::{self, NeighborSet, Strategy};
use crate::numeric::{self, Matrix, SeededRng};
use crate::objective::{self, Temperature, DEFAULT_TEMPERATURE};
use crate::optim::{self, OptimizerState, DEFAULT_BASE_LR, DEFAULT_NESTEROV_MU};

/// When neighbor sets are recomputed from the current bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetPolicy {
    EveryStep,
    EveryEpoch,
    Never,
}

impl fmt::Display for ResetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ResetPolicy::EveryStep => "every-step",
            ResetPolicy::EveryEpoch => "every-epoch",
            ResetPolicy::Never => "never",
        })
    }
}

impl FromStr for ResetPolicy {
    type Err = SuvrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "every-step" => Ok(ResetPolicy::EveryStep),
            "every-epoch" => Ok(ResetPolicy::EveryEpoch),
            "never" => Ok(ResetPolicy::Never),
            other => Err(SuvrError::config(
                "reset_policy",
                format!("expected every-step, every-epoch or never; got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub strategy: Strategy,
    /// Neighbors explored per query (positives + carved negatives).
    pub k: usize,
    /// Negatives carved out of the `k` discovered neighbors.
    pub m: usize,
    /// Extra negatives drawn uniformly from the rest of the bank.
    pub extra_negatives: usize,
    pub tau: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub nesterov_mu: f64,
    /// Memory-bank EMA momentum.
    pub momentum: f64,
    pub reset_policy: ResetPolicy,
    /// Leading epochs that optimize the instance term only.
    pub warmup_epochs: usize,
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            strategy: Strategy::Greedy,
            k: 4,
            m: 2,
            extra_negatives: 0,
            tau: DEFAULT_TEMPERATURE,
            epochs: 50,
            batch_size: 32,
            base_lr: DEFAULT_BASE_LR,
            nesterov_mu: DEFAULT_NESTEROV_MU,
            momentum: DEFAULT_BANK_MOMENTUM,
            reset_policy: ResetPolicy::EveryStep,
            warmup_epochs: 0,
            seed: 0,
            embed_dim: DEFAULT_EMBED_DIM,
            hidden: vec![DEFAULT_HIDDEN],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: String| Err(SuvrError::config(format!("train.{field}"), reason));
        if self.k < 1 {
            return fail("k", format!("must be >= 1, got {}", self.k));
        }
        if self.m >= self.k {
            return fail("m", format!("must be < k ({}), got {}", self.k, self.m));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return fail("tau", format!("must be positive, got {}", self.tau));
        }
        if self.batch_size < 1 {
            return fail("batch_size", "must be >= 1".into());
        }
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return fail("base_lr", format!("must be positive, got {}", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.nesterov_mu) {
            return fail("nesterov_mu", format!("must lie in [0, 1), got {}", self.nesterov_mu));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return fail("momentum", format!("must lie in [0, 1], got {}", self.momentum));
        }
        if self.embed_dim < 1 {
            return fail("embed_dim", "must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden", "layer widths must be >= 1".into());
        }
        Ok(())
    }

    /// Checks the config against a training set of `n` instances.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.k + self.extra_negatives > n.saturating_sub(1) {
            return Err(SuvrError::config(
                "train.k",
                format!(
                    "k + extra_negatives = {} exceeds the {} other instances",
                    self.k + self.extra_negatives,
                    n.saturating_sub(1)
                ),
            ));
        }
        Ok(())
    }

    fn temperature(&self) -> Result<Temperature> {
        Temperature::new(self.tau)
    }
}

/// Mean loss terms over a batch or an epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub instance: f64,
    pub positive: f64,
    pub negative: f64,
    pub total: f64,
}

impl LossTerms {
    fn add(&mut self, l: &objective::LossBreakdown) {
        self.instance += l.instance_term;
        self.positive += l.positive_term;
        self.negative += l.negative_term;
        self.total += l.total;
    }

    fn scaled(mut self, f: f64) -> Self {
        self.instance *= f;
        self.positive *= f;
        self.negative *= f;
        self.total *= f;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossTerms,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
struct CachedSet {
    epoch: usize,
    set: NeighborSet,
}

/// Encoder, bank and optimizer state for one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    tau: Temperature,
    encoder: MlpEncoder,
    bank: MemoryBank,
    optimizer: OptimizerState,
    cache: Vec<Option<CachedSet>>,
    negative_rng: SeededRng,
}

impl Trainer {
    /// Fresh encoder and random bank for `n` instances of width `d_in`.
    pub fn new(n: usize, d_in: usize, cfg: TrainConfig) -> Result<Self> {
        cfg.validate_for(n)?;
        let bank_rows = numeric::random_unit_rows(n, cfg.embed_dim, &mut SeededRng::derive(cfg.seed, 1))?;
        let bank = MemoryBank::from_embeddings(bank_rows, cfg.momentum)?;
        let encoder = MlpEncoder::new(d_in, &cfg.hidden, cfg.embed_dim, &mut SeededRng::derive(cfg.seed, 2))?;
        let optimizer = OptimizerState::new(&encoder.parameter_lengths(), cfg.nesterov_mu, cfg.base_lr)?;
        Trainer::from_parts(cfg, encoder, bank, optimizer)
    }

    pub fn from_parts(cfg: TrainConfig, encoder: MlpEncoder, bank: MemoryBank, optimizer: OptimizerState) -> Result<Self> {
        cfg.validate_for(bank.len())?;
        if encoder.output_dim() != bank.dim() {
            return Err(SuvrError::DimensionMismatch {
                expected: bank.dim(),
                found: encoder.output_dim(),
            });
        }
        Ok(Trainer {
            tau: cfg.temperature()?,
            cache: vec![None; bank.len()],
            negative_rng: SeededRng::derive(cfg.seed, 4),
            cfg,
            encoder,
            bank,
            optimizer,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn encoder(&self) -> &MlpEncoder {
        &self.encoder
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn into_parts(self) -> (MlpEncoder, MemoryBank, OptimizerState) {
        (self.encoder, self.bank, self.optimizer)
    }

    /// The neighbor set cached for instance `i`, if one has been discovered.
    pub fn cached_neighbors(&self, i: usize) -> Option<&NeighborSet> {
        self.cache.get(i)?.as_ref().map(|c| &c.set)
    }

    fn neighbors_for(&mut self, i: usize, epoch: usize) -> Result<NeighborSet> {
        let reuse = match (&self.cache[i], self.cfg.reset_policy) {
            (Some(_), ResetPolicy::Never) => true,
            (Some(c), ResetPolicy::EveryEpoch) => c.epoch == epoch,
            _ => false,
        };
        if reuse {
            return Ok(self.cache[i].as_ref().expect("checked above").set.clone());
        }
        let mut set = neighbors::discover(&self.bank, i, self.cfg.strategy, self.cfg.k, self.cfg.m)?;
        neighbors::add_uniform_negatives(&self.bank, &mut set, self.cfg.extra_negatives, &mut self.negative_rng)?;
        self.cache[i] = Some(CachedSet { epoch, set: set.clone() });
        Ok(set)
    }

    /// One optimization step over `batch` (instance indices into `features`).
    ///
    /// Discovery and losses all see the bank as it was at step start; the
    /// EMA updates land afterwards in batch order. `epoch` is 0-based and
    /// decides both warm-up and neighbor reuse.
    pub fn train_step(&mut self, features: &Matrix, batch: &[usize], epoch: usize, lr: f64) -> Result<LossTerms> {
        if batch.is_empty() {
            return Err(SuvrError::InvalidArgument("empty batch".into()));
        }
        if features.rows() != self.bank.len() {
            return Err(SuvrError::DimensionMismatch {
                expected: self.bank.len(),
                found: features.rows(),
            });
        }
        let warmup = epoch < self.cfg.warmup_epochs;
        let mut grads = EncoderGrads::zeros_like(&self.encoder);
        let mut terms = LossTerms::default();
        let mut fresh = Vec::with_capacity(batch.len());
        for &i in batch {
            self.bank.check_index(i)?;
            let cache = self.encoder.forward(features.row(i)).map_err(|e| SuvrError::InvalidArgument(format!(
                "forward pass for instance {i} aborted the step: {e}"
            )))?;
            let (pos, neg) = if warmup {
                (Vec::new(), Vec::new())
            } else {
                let set = self.neighbors_for(i, epoch)?;
                (set.positive_indices(), set.negative_indices())
            };
            let (loss, dl_dv) = objective::loss_and_gradient(&self.bank, cache.embedding(), i, &pos, &neg, self.tau)?;
            terms.add(&loss);
            grads.accumulate(&self.encoder.backward(&cache, &dl_dv)?);
            fresh.push((i, cache.embedding().to_vec()));
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        optim::nesterov_step(&mut self.encoder.parameters_mut(), &grads.slices(), &mut self.optimizer, lr)?;
        for (i, v) in fresh {
            self.bank.ema_update(i, &v)?;
        }
        Ok(terms.scaled(scale))
    }

    /// Runs one shuffled epoch (0-based `epoch`) and returns its record.
    pub fn run_epoch(&mut self, features: &Matrix, epoch: usize, shuffle: &mut SeededRng) -> Result<EpochRecord> {
        let start = Instant::now();
        let lr = optim::lr_at_epoch(self.cfg.base_lr, epoch);
        self.optimizer.epoch = epoch;
        let mut order: Vec<usize> = (0..features.rows()).collect();
        shuffle.shuffle(&mut order);
        let mut sum = LossTerms::default();
        for batch in order.chunks(self.cfg.batch_size) {
            let mean = self.train_step(features, batch, epoch, lr)?;
            let w = batch.len() as f64;
            sum.instance += mean.instance * w;
            sum.positive += mean.positive * w;
            sum.negative += mean.negative * w;
            sum.total += mean.total * w;
        }
        self.optimizer.epoch = epoch + 1;
        Ok(EpochRecord {
            epoch: epoch + 1,
            lr,
            loss: sum.scaled(1.0 / features.rows() as f64),
            wall_time_secs: start.elapsed().as_secs_f64(),
        })
    }
}

pub struct FitOutput {
    pub trainer: Trainer,
    pub history: TrainHistory,
}

/// Trains on `features` for `cfg.epochs` epochs. Labels never enter here.
pub fn fit(features: &Matrix, cfg: &TrainConfig) -> Result<FitOutput> {
    fit_with(features, cfg, |_| Ok(()))
}

/// [`fit`] with a callback invoked after every epoch.
pub fn fit_with(
    features: &Matrix,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<FitOutput> {
    let mut trainer = Trainer::new(features.rows(), features.cols(), cfg.clone())?;
    let mut shuffle = SeededRng::derive(cfg.seed, 3);
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let record = trainer.run_epoch(features, epoch, &mut shuffle)?;
        on_epoch(&record)?;
        history.epochs.push(record);
    }
    Ok(FitOutput { trainer, history })
}
