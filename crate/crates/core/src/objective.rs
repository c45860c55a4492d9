//! Non-parametric instance softmax over the memory bank and the three-term
//! loss built on it, with its analytic gradient in the query embedding.
//!
//! With `p = softmax(M v / τ)` and query index `i`:
//!
//! ```text
//! L(v) = −log p_i  −  Σ_{j ∈ pos} log p_j  −  Σ_{c ∈ neg} log(1 − p_c)
//! ```
//!
//! Bank rows are constants here; only `v` receives gradient.

use crate::bank::MemoryBank;
use crate::error::{Result, SuvrError};
use crate::numeric::{self, stable_softmax};

/// Probabilities of negatives are clamped to this before `log(1 − p)`.
pub const NEGATIVE_CLAMP: f64 = 1.0 - 1e-7;

pub const DEFAULT_TEMPERATURE: f64 = 0.07;

/// Strictly positive softmax temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(SuvrError::NonPositiveTemperature(tau));
        }
        Ok(Temperature(tau))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature(DEFAULT_TEMPERATURE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub instance_term: f64,
    pub positive_term: f64,
    pub negative_term: f64,
    pub total: f64,
    pub probabilities: Vec<f64>,
}

/// `P(· | v)` over every bank instance.
pub fn instance_probabilities(bank: &MemoryBank, v: &[f64], tau: Temperature) -> Result<Vec<f64>> {
    stable_softmax(&bank.similarities(v)?, tau.get())
}

fn check_sets(bank: &MemoryBank, i: usize, positives: &[usize], negatives: &[usize]) -> Result<()> {
    let mut seen = vec![false; bank.len()];
    for &j in std::iter::once(&i).chain(positives).chain(negatives) {
        bank.check_index(j)?;
        if std::mem::replace(&mut seen[j], true) {
            return Err(SuvrError::OverlappingSets { index: j });
        }
    }
    Ok(())
}

/// Softmax probabilities plus their logs, the latter taken straight from the
/// log-sum-exp so that `−log p` stays finite when `p` underflows.
fn softmax_with_logs(scores: &[f64], tau: Temperature) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = stable_softmax(scores, tau.get())?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = scores
        .iter()
        .map(|&s| ((s - max) / tau.get()).exp())
        .sum::<f64>()
        .ln();
    let log_p = scores.iter().map(|&s| (s - max) / tau.get() - log_z).collect();
    Ok((p, log_p))
}

fn breakdown(
    (p, log_p): (Vec<f64>, Vec<f64>),
    i: usize,
    positives: &[usize],
    negatives: &[usize],
) -> LossBreakdown {
    let instance_term = -log_p[i];
    let positive_term = -positives.iter().map(|&j| log_p[j]).sum::<f64>();
    let negative_term = -negatives
        .iter()
        .map(|&c| (1.0 - p[c].min(NEGATIVE_CLAMP)).ln())
        .sum::<f64>();
    LossBreakdown {
        instance_term,
        positive_term,
        negative_term,
        total: instance_term + positive_term + negative_term,
        probabilities: p,
    }
}

pub fn suvr_loss(
    bank: &MemoryBank,
    v: &[f64],
    i: usize,
    positives: &[usize],
    negatives: &[usize],
    tau: Temperature,
) -> Result<LossBreakdown> {
    check_sets(bank, i, positives, negatives)?;
    let probs = softmax_with_logs(&bank.similarities(v)?, tau)?;
    Ok(breakdown(probs, i, positives, negatives))
}

/// `dL/dv` of [`suvr_loss`].
pub fn loss_gradient(
    bank: &MemoryBank,
    v: &[f64],
    i: usize,
    positives: &[usize],
    negatives: &[usize],
    tau: Temperature,
) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(bank, v, i, positives, negatives, tau)?.1)
}

/// Loss and gradient from a single softmax evaluation.
///
/// Each `−log p_a` term contributes `−(M_a − p̄)/τ` and each `−log(1 − p_c)`
/// term contributes `p_c/(1 − p_c) · (M_c − p̄)/τ`, where `p̄ = Σ_j p_j M_j`.
/// A clamped negative contributes nothing, matching the flat loss.
pub fn loss_and_gradient(
    bank: &MemoryBank,
    v: &[f64],
    i: usize,
    positives: &[usize],
    negatives: &[usize],
    tau: Temperature,
) -> Result<(LossBreakdown, Vec<f64>)> {
    check_sets(bank, i, positives, negatives)?;
    let (p, log_p) = softmax_with_logs(&bank.similarities(v)?, tau)?;
    let d = bank.dim();

    let mut mean_row = vec![0.0; d];
    for (j, &pj) in p.iter().enumerate() {
        for (acc, x) in mean_row.iter_mut().zip(bank.row(j)) {
            *acc += pj * x;
        }
    }

    // Each anchor a contributes weight_a · (M_a − p̄); collect the weights.
    let mut weights: Vec<(usize, f64)> = Vec::with_capacity(1 + positives.len() + negatives.len());
    weights.push((i, -1.0));
    weights.extend(positives.iter().map(|&j| (j, -1.0)));
    for &c in negatives {
        if p[c] < NEGATIVE_CLAMP {
            weights.push((c, p[c] / (1.0 - p[c])));
        }
    }

    let inv_tau = 1.0 / tau.get();
    let mut grad = vec![0.0; d];
    let mut total_weight = 0.0;
    for &(a, w) in &weights {
        total_weight += w;
        for (g, x) in grad.iter_mut().zip(bank.row(a)) {
            *g += w * x;
        }
    }
    for (g, mbar) in grad.iter_mut().zip(&mean_row) {
        *g = (*g - total_weight * mbar) * inv_tau;
    }
    debug_assert!(numeric::norm(&grad).is_finite());
    Ok((breakdown((p, log_p), i, positives, negatives), grad))
}
