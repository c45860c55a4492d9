//! The memory bank: one unit-norm embedding per training instance, refreshed
//! by an exponential moving average of the encoder's outputs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SuvrError};
use crate::numeric::{self, Matrix, SeededRng};

pub const DEFAULT_BANK_MOMENTUM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    embeddings: Matrix,
    momentum: f64,
}

impl MemoryBank {
    /// `n` random unit rows of width `d`.
    pub fn init(n: usize, d: usize, momentum: f64, seed: u64) -> Result<Self> {
        let embeddings = numeric::random_unit_rows(n, d, &mut SeededRng::new(seed))?;
        MemoryBank::from_embeddings(embeddings, momentum)
    }

    /// Adopts an existing matrix. Rows must already be unit-norm (within 1e-9).
    pub fn from_embeddings(embeddings: Matrix, momentum: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(SuvrError::config(
                "momentum",
                format!("must lie in [0, 1], got {momentum}"),
            ));
        }
        for (i, row) in embeddings.iter_rows().enumerate() {
            let n = numeric::norm(row);
            if (n - 1.0).abs() > 1e-9 {
                return Err(SuvrError::InvalidArgument(format!(
                    "bank row {i} has norm {n}, expected 1"
                )));
            }
        }
        Ok(MemoryBank {
            embeddings,
            momentum,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.embeddings.row(i)
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(SuvrError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// `M · v`: similarity of `v` to every stored instance.
    pub fn similarities(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.embeddings.mul_vec(v)
    }

    /// Similarities of stored instance `i` to every instance (including itself).
    pub fn similarities_to(&self, i: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        self.similarities(self.row(i))
    }

    /// `M_i ← normalize(momentum · M_i + (1 − momentum) · v)`.
    pub fn ema_update(&mut self, i: usize, v: &[f64]) -> Result<()> {
        self.check_index(i)?;
        numeric::check_len(self.dim(), v.len())?;
        let m = self.momentum;
        let mut blended: Vec<f64> = self
            .row(i)
            .iter()
            .zip(v)
            .map(|(old, new)| m * old + (1.0 - m) * new)
            .collect();
        numeric::l2_normalize_in_place(&mut blended)?;
        self.embeddings.row_mut(i).copy_from_slice(&blended);
        Ok(())
    }
}

/// Descending by score, then ascending by index.
pub(crate) fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Highest-scoring index not in `excluded`, ties to the smaller index.
pub(crate) fn argmax_excluding(scores: &[f64], excluded: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..scores.len() {
        if excluded[i] {
            continue;
        }
        match best {
            Some(b) if scores[i] <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// The `k` highest-scoring indices outside `excluded`, best first.
pub fn top_k_excluding(scores: &[f64], k: usize, excluded: &[usize]) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(SuvrError::InvalidArgument("top-k needs k >= 1".into()));
    }
    let mut mask = vec![false; scores.len()];
    for &e in excluded {
        if e >= scores.len() {
            return Err(SuvrError::IndexOutOfRange {
                index: e,
                len: scores.len(),
            });
        }
        mask[e] = true;
    }
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&i| !mask[i]).collect();
    if candidates.len() < k {
        return Err(SuvrError::NotEnoughCandidates {
            requested: k,
            available: candidates.len(),
        });
    }
    let cmp = |a: &usize, b: &usize| rank_order(scores, *a, *b);
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, cmp);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(cmp);
    Ok(candidates)
}
