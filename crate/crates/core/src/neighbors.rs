//! Neighbor discovery over the implicit similarity graph of the memory bank.
//!
//! Nodes are bank rows and edge weights are dot products, so the graph is
//! never materialized: each traversal step is one `M · v` product. Three
//! traversals produce the positive set:
//!
//! - [`Strategy::Bfs`]: the `k` most similar instances to the query (1 hop).
//! - [`Strategy::Dfs`]: a `k`-hop chain, each hop to the most similar
//!   unvisited instance of the previous hop.
//! - [`Strategy::Greedy`]: per step, whichever of the BFS and DFS candidates
//!   is more similar to its anchor.
//!
//! Hard negatives are then carved out of the positives: the least similar
//! discovered instances are moved to the negative set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bank::{argmax_excluding, top_k_excluding, MemoryBank};
use crate::error::{Result, SuvrError};
use crate::numeric::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Bfs,
    Dfs,
    Greedy,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Bfs, Strategy::Dfs, Strategy::Greedy];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Strategy::Bfs => "bfs",
            Strategy::Dfs => "dfs",
            Strategy::Greedy => "greedy",
        })
    }
}

impl FromStr for Strategy {
    type Err = SuvrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfs" => Ok(Strategy::Bfs),
            "dfs" => Ok(Strategy::Dfs),
            "greedy" => Ok(Strategy::Greedy),
            other => Err(SuvrError::config(
                "strategy",
                format!("expected one of bfs, dfs, greedy; got {other:?}"),
            )),
        }
    }
}

/// Which anchor selected a positive: the query itself, or the previous hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hop {
    Breadth,
    Depth,
}

/// A discovered positive. `similarity` is measured against `parent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Positive {
    pub index: usize,
    pub similarity: f64,
    pub parent: usize,
    pub hop: Hop,
}

/// A negative, with its similarity to the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Negative {
    pub index: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub query: usize,
    pub positives: Vec<Positive>,
    pub negatives: Vec<Negative>,
}

impl NeighborSet {
    pub fn positive_indices(&self) -> Vec<usize> {
        self.positives.iter().map(|p| p.index).collect()
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        self.negatives.iter().map(|n| n.index).collect()
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Re-checks the structural invariants against a bank of `n` instances.
    /// With `expected_len`, also checks `|positives| + |negatives|`.
    pub fn validate(&self, n: usize, expected_len: Option<usize>) -> Result<()> {
        let mut seen = vec![false; n];
        let mut mark = |i: usize| -> Result<()> {
            if i >= n {
                return Err(SuvrError::IndexOutOfRange { index: i, len: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(SuvrError::OverlappingSets { index: i });
            }
            Ok(())
        };
        mark(self.query)?;
        for p in &self.positives {
            mark(p.index)?;
        }
        for c in &self.negatives {
            mark(c.index)?;
        }
        if let Some(k) = expected_len {
            if self.len() != k {
                return Err(SuvrError::InvalidArgument(format!(
                    "neighbor set for {} holds {} instances, expected {k}",
                    self.query,
                    self.len()
                )));
            }
        }
        Ok(())
    }
}

fn check_request(bank: &MemoryBank, query: usize, k: usize) -> Result<()> {
    bank.check_index(query)?;
    if k == 0 {
        return Err(SuvrError::InvalidArgument("neighbor count k must be >= 1".into()));
    }
    let available = bank.len() - 1;
    if k > available {
        return Err(SuvrError::NotEnoughCandidates {
            requested: k,
            available,
        });
    }
    Ok(())
}

/// The `k` instances most similar to the query's bank row.
pub fn bfs_positives(bank: &MemoryBank, query: usize, k: usize) -> Result<Vec<Positive>> {
    check_request(bank, query, k)?;
    let scores = bank.similarities_to(query)?;
    Ok(top_k_excluding(&scores, k, &[query])?
        .into_iter()
        .map(|index| Positive {
            index,
            similarity: scores[index],
            parent: query,
            hop: Hop::Breadth,
        })
        .collect())
}

/// A chain of `k` hops, each to the unvisited instance most similar to the
/// previous hop (the query for the first).
pub fn dfs_positives(bank: &MemoryBank, query: usize, k: usize) -> Result<Vec<Positive>> {
    check_request(bank, query, k)?;
    let mut visited = vec![false; bank.len()];
    visited[query] = true;
    let mut frontier = query;
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let scores = bank.similarities_to(frontier)?;
        let next = argmax_excluding(&scores, &visited).expect("k <= n - 1 leaves a candidate");
        visited[next] = true;
        out.push(Positive {
            index: next,
            similarity: scores[next],
            parent: frontier,
            hop: if frontier == query { Hop::Breadth } else { Hop::Depth },
        });
        frontier = next;
    }
    Ok(out)
}

/// At each step compare the best unvisited instance by similarity to the
/// query against the best by similarity to the frontier, and take the
/// higher (ties go to the query-anchored pick). The taken instance becomes
/// the new frontier either way.
pub fn greedy_positives(bank: &MemoryBank, query: usize, k: usize) -> Result<Vec<Positive>> {
    check_request(bank, query, k)?;
    let query_scores = bank.similarities_to(query)?;
    let mut visited = vec![false; bank.len()];
    visited[query] = true;
    let mut frontier = query;
    let mut frontier_scores = query_scores.clone();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let b = argmax_excluding(&query_scores, &visited).expect("k <= n - 1 leaves a candidate");
        let d = argmax_excluding(&frontier_scores, &visited).expect("same candidate pool");
        let pick = if frontier_scores[d] > query_scores[b] {
            Positive {
                index: d,
                similarity: frontier_scores[d],
                parent: frontier,
                hop: Hop::Depth,
            }
        } else {
            Positive {
                index: b,
                similarity: query_scores[b],
                parent: query,
                hop: Hop::Breadth,
            }
        };
        visited[pick.index] = true;
        out.push(pick);
        frontier = pick.index;
        frontier_scores = bank.similarities_to(frontier)?;
    }
    Ok(out)
}

pub fn positives(
    bank: &MemoryBank,
    query: usize,
    strategy: Strategy,
    k: usize,
) -> Result<Vec<Positive>> {
    match strategy {
        Strategy::Bfs => bfs_positives(bank, query, k),
        Strategy::Dfs => dfs_positives(bank, query, k),
        Strategy::Greedy => greedy_positives(bank, query, k),
    }
}

/// Moves the `m` positives least similar to the query into the negative set.
///
/// Negatives come out in ascending similarity; among equal similarities the
/// higher index is taken first. Remaining positives keep their order.
pub fn sample_negatives(
    bank: &MemoryBank,
    query: usize,
    positives: Vec<Positive>,
    m: usize,
) -> Result<(Vec<Positive>, Vec<Negative>)> {
    if m >= positives.len() && m > 0 {
        return Err(SuvrError::NegativesExhaustPositives {
            negatives: m,
            positives: positives.len(),
        });
    }
    if m == 0 {
        return Ok((positives, Vec::new()));
    }
    let anchor = bank.row(query);
    let to_query: Vec<f64> = positives
        .iter()
        .map(|p| crate::numeric::dot(anchor, bank.row(p.index)))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..positives.len()).collect();
    order.sort_by(|&a, &b| {
        to_query[a]
            .total_cmp(&to_query[b])
            .then(positives[b].index.cmp(&positives[a].index))
    });
    let mut carved = vec![false; positives.len()];
    let negatives = order[..m]
        .iter()
        .map(|&slot| {
            carved[slot] = true;
            Negative {
                index: positives[slot].index,
                similarity: to_query[slot],
            }
        })
        .collect();
    let kept = positives
        .into_iter()
        .zip(carved)
        .filter_map(|(p, c)| (!c).then_some(p))
        .collect();
    Ok((kept, negatives))
}

/// Runs `strategy` for `k` positives and carves `m` of them into negatives.
pub fn discover(
    bank: &MemoryBank,
    query: usize,
    strategy: Strategy,
    k: usize,
    m: usize,
) -> Result<NeighborSet> {
    let found = positives(bank, query, strategy, k)?;
    let (positives, negatives) = sample_negatives(bank, query, found, m)?;
    Ok(NeighborSet {
        query,
        positives,
        negatives,
    })
}

/// Appends `q` extra negatives drawn uniformly from the instances not
/// already in the set.
pub fn add_uniform_negatives(
    bank: &MemoryBank,
    set: &mut NeighborSet,
    q: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    if q == 0 {
        return Ok(());
    }
    let mut taken = vec![false; bank.len()];
    taken[set.query] = true;
    for i in set.positive_indices().into_iter().chain(set.negative_indices()) {
        taken[i] = true;
    }
    let mut pool: Vec<usize> = (0..bank.len()).filter(|&i| !taken[i]).collect();
    if pool.len() < q {
        return Err(SuvrError::NotEnoughCandidates {
            requested: q,
            available: pool.len(),
        });
    }
    // Partial Fisher-Yates: the first q slots end up a uniform sample.
    for slot in 0..q {
        let j = slot + rng.index(pool.len() - slot);
        pool.swap(slot, j);
    }
    let anchor = bank.row(set.query);
    for &index in &pool[..q] {
        set.negatives.push(Negative {
            index,
            similarity: crate::numeric::dot(anchor, bank.row(index))?,
        });
    }
    Ok(())
}

/// One line of a traversal trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub strategy: Strategy,
    pub k: usize,
    pub m: usize,
    #[serde(flatten)]
    pub set: NeighborSet,
}
