//! Dense row-stochastic matrices, probability vectors and the stationary
//! distribution solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums (and on probability vector sums).
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Default residual tolerance for `‖πP − π‖_∞`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Default iteration cap for the power-iteration fallback.
pub const STATIONARY_MAX_ITER: usize = 1_000_000;

/// Row-stochastic `M × M` matrix stored dense, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates `entries` (row-major, `dim * dim` values) and wraps them.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        for (idx, &v) in entries.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({}, {}) = {v} is outside [0, 1]",
                    idx / dim,
                    idx % dim
                )));
            }
        }
        for i in 0..dim {
            let sum: f64 = entries[i * dim..(i + 1) * dim].iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Skips validation. Callers guarantee stochasticity by construction.
    pub(crate) fn from_raw(dim: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    /// Positive off-row entries of row `i` as `(column, probability)` pairs.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(i)
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }

    /// Largest `|Σ_j P_ij − 1|` over all rows.
    pub fn row_sum_deviation(&self) -> f64 {
        self.entries
            .chunks(self.dim)
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector times matrix, `x P`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length must match matrix dimension");
        let mut out = vec![0.0; self.dim];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += xi * p;
            }
        }
        out
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.to_rows()
    }
}

/// Distribution over tasks: non-negative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector {
    values: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} = {v} is negative or not finite"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { values })
    }

    /// A target distribution: a probability vector with every entry strictly positive.
    pub fn target(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::NonPositiveTarget { index, value });
        }
        Self::new(values)
    }

    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            values: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn one_hot(dim: usize, index: usize) -> Self {
        assert!(index < dim, "index {index} out of range for dimension {dim}");
        let mut values = vec![0.0; dim];
        values[index] = 1.0;
        Self { values }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.values, &other.values)
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.values
    }
}

/// Swarm state: task fractions, optionally backed by integer agent counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub fractions: ProbabilityVector,
    pub agent_counts: Option<Vec<u64>>,
}

impl SwarmState {
    pub fn from_fractions(fractions: ProbabilityVector) -> Self {
        Self {
            fractions,
            agent_counts: None,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidDistribution("agent counts sum to zero".into()));
        }
        let fractions = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            fractions: ProbabilityVector::from_raw(fractions),
            agent_counts: Some(counts),
        })
    }

    pub fn num_agents(&self) -> Option<u64> {
        self.agent_counts.as_ref().map(|c| c.iter().sum())
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `‖πP − π‖_∞`.
pub fn stationary_residual(p: &StochasticMatrix, pi: &[f64]) -> f64 {
    max_abs_diff(&p.left_multiply(pi), pi)
}

/// Left eigenvector of `p` for eigenvalue one, normalized to sum one.
///
/// Solves `(Pᵀ − I)π = 0` with the last equation replaced by `Σπ = 1`. If the
/// dense solve fails or leaves a residual above `tol`, falls back to power
/// iteration on the lazy chain `(P + I)/2`, which shares the stationary vector
/// and is aperiodic.
pub fn stationary_distribution(
    p: &StochasticMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<ProbabilityVector> {
    let m = p.dim();
    if m == 1 {
        return Ok(ProbabilityVector::from_raw(vec![1.0]));
    }

    let mut a = p.to_nalgebra().transpose();
    for i in 0..m {
        a[(i, i)] -= 1.0;
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;

    if let Some(sol) = a.lu().solve(&rhs) {
        let pi: Vec<f64> = sol.iter().copied().collect();
        if pi.iter().all(|v| v.is_finite()) && stationary_residual(p, &pi) <= tol {
            return Ok(ProbabilityVector::from_raw(pi));
        }
    }
    log::debug!("dense stationary solve inadequate, falling back to power iteration");
    power_iteration(p, tol, max_iter)
}

fn power_iteration(p: &StochasticMatrix, tol: f64, max_iter: usize) -> Result<ProbabilityVector> {
    let m = p.dim();
    let mut pi = vec![1.0 / m as f64; m];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let moved = p.left_multiply(&pi);
        residual = max_abs_diff(&moved, &pi);
        if residual <= tol {
            return Ok(ProbabilityVector::from_raw(pi));
        }
        let mut next: Vec<f64> = moved.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        pi = next;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// True iff `p` and `reference` have the same positive-entry pattern.
pub fn check_sparsity_match(p: &StochasticMatrix, reference: &StochasticMatrix) -> bool {
    p.dim() == reference.dim()
        && p
            .entries()
            .iter()
            .zip(reference.entries())
            .all(|(&a, &b)| (a > 0.0) == (b > 0.0))
}
