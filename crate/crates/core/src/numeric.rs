//! Dense vector/matrix primitives, seeded randomness and a stable softmax.
//!
//! Vectors are plain `[f64]` slices. [`Matrix`] is a row-major `n × d`
//! buffer; every embedding table in the crate (memory bank, encoder weights,
//! exported embeddings) is one of these.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SuvrError};

/// Norms below this are treated as degenerate and refuse to normalize.
pub const NORM_FLOOR: f64 = 1e-12;

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps a row-major buffer. Fails if the buffer length disagrees with
    /// the shape or either dimension is zero.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SuvrError::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(SuvrError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(SuvrError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · v`, one dot product per row.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, v.len())?;
        Ok(self.iter_rows().map(|row| dot_unchecked(row, v)).collect())
    }

    /// Copies the listed rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(SuvrError::IndexOutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(indices.len(), self.cols, data)
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(SuvrError::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn dot_unchecked(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    Ok(dot_unchecked(u, v))
}

pub fn norm(v: &[f64]) -> f64 {
    dot_unchecked(v, v).sqrt()
}

/// Scales `v` to unit Euclidean length.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    l2_normalize_in_place(&mut out)?;
    Ok(out)
}

pub fn l2_normalize_in_place(v: &mut [f64]) -> Result<f64> {
    let n = norm(v);
    if !(n >= NORM_FLOOR) || !n.is_finite() {
        return Err(SuvrError::NormTooSmall { norm: n });
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(n)
}

/// `exp(s_i / tau) / Σ_j exp(s_j / tau)` with the max score subtracted first.
pub fn stable_softmax(scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(SuvrError::NonPositiveTemperature(tau));
    }
    if scores.is_empty() {
        return Err(SuvrError::InvalidArgument("softmax of an empty vector".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|&s| ((s - max) / tau).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

/// Deterministic, platform-independent random source (ChaCha8).
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// An independent generator for a named sub-stream of `seed`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        SeededRng::new(splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5EED))))
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A unit vector drawn uniformly from the sphere.
pub fn random_unit_vector(d: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        if l2_normalize_in_place(&mut v).is_ok() {
            return v;
        }
    }
}

/// `n × d` matrix whose rows are independent uniform unit vectors.
pub fn random_unit_rows(n: usize, d: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if n == 0 || d == 0 {
        return Err(SuvrError::InvalidArgument(format!(
            "random_unit_rows needs n, d >= 1, got {n}x{d}"
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        data.extend(random_unit_vector(d, rng));
    }
    Matrix::from_vec(n, d, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(l2_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            l2_normalize(&[0.0, 0.0]),
            Err(SuvrError::NormTooSmall { .. })
        ));
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let u = l2_normalize(&[0.3, -1.2, 2.0]).unwrap();
        assert!((dot(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(SuvrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(stable_softmax(&[1.0, 1.0], 1.0).unwrap(), vec![0.5, 0.5]);
        let p = stable_softmax(&[0.0, 3f64.ln()], 1.0).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        let a = stable_softmax(&[2.0, 4.0], 2.0).unwrap();
        let b = stable_softmax(&[1.0, 2.0], 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(matches!(
            stable_softmax(&[1.0], 0.0),
            Err(SuvrError::NonPositiveTemperature(_))
        ));
    }

    #[test]
    fn softmax_survives_huge_scores() {
        let p = stable_softmax(&[1000.0, 999.0], 0.01).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_rows_are_unit_and_deterministic() {
        let a = random_unit_rows(50, 7, &mut SeededRng::new(3)).unwrap();
        let b = random_unit_rows(50, 7, &mut SeededRng::new(3)).unwrap();
        assert_eq!(a, b);
        for row in a.iter_rows() {
            assert!((norm(row) - 1.0).abs() < 1e-12);
        }
        assert!(random_unit_rows(0, 3, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn unit_rows_have_no_preferred_direction() {
        // Oracle: the mean of n uniform unit vectors in d dims has expected
        // squared norm 1/n, so ~0.03 for n=1000; 0.2 is far out in the tail.
        for seed in 0..5 {
            let m = random_unit_rows(1000, 8, &mut SeededRng::new(seed)).unwrap();
            let mut mean = vec![0.0; 8];
            for row in m.iter_rows() {
                for (acc, x) in mean.iter_mut().zip(row) {
                    *acc += x / 1000.0;
                }
            }
            assert!(norm(&mean) < 0.2, "seed {seed}: {}", norm(&mean));
        }
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = SeededRng::derive(1, 0);
        let mut b = SeededRng::derive(1, 1);
        assert_ne!(a.uniform(), b.uniform());
    }

    fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len)
    }

    fn small_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, len)
    }

    proptest! {
        #[test]
        fn normalized_has_unit_norm(v in finite_vec(6)) {
            prop_assume!(norm(&v) >= NORM_FLOOR);
            let u = l2_normalize(&v).unwrap();
            prop_assert!((norm(&u) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            s in finite_vec(8), shift in -50.0f64..50.0, tau in 0.01f64..5.0
        ) {
            let p = stable_softmax(&s, tau).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
            let shifted: Vec<f64> = s.iter().map(|x| x + shift).collect();
            let q = stable_softmax(&shifted, tau).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_argmax_ignores_temperature(s in finite_vec(8), tau in 0.01f64..5.0) {
            let argmax = |xs: &[f64]| {
                xs.iter().enumerate().fold(0, |best, (i, &x)| if x > xs[best] { i } else { best })
            };
            let p = stable_softmax(&s, tau).unwrap();
            prop_assert_eq!(argmax(&p), argmax(&s));
        }

        #[test]
        fn dot_symmetric_and_bilinear(
            u in small_vec(5), v in small_vec(5), w in small_vec(5), a in -3.0f64..3.0
        ) {
            prop_assert_eq!(dot(&u, &v).unwrap(), dot(&v, &u).unwrap());
            let combo: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + y).collect();
            let lhs = dot(&combo, &v).unwrap();
            let rhs = a * dot(&u, &v).unwrap() + dot(&w, &v).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
