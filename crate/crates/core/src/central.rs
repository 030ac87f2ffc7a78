//! Closed-form synthesis of the broadcast kernel `P*` whose stationary
//! distribution is a prescribed target.
//!
//! The kernel is a diagonal perturbation of an irreducible kernel `P`:
//!
//! ```text
//! P* = D P − D + I,   D = diag(d),   d_i ∈ (0, 1)
//! ```
//!
//! which keeps rows stochastic, keeps the support of `P` (given a positive
//! diagonal) and keeps irreducibility. If `π` is stationary for `P` then
//! `π D⁻¹` is stationary for `P*`, so choosing `d_i ∝ π_i / p^d_i` moves the
//! stationary vector onto `p^d`.

use crate::error::{Error, Result};
use crate::graph::is_irreducible;
use crate::stochastic::{
    check_sparsity_match, stationary_distribution, ProbabilityVector, StochasticMatrix,
    STATIONARY_MAX_ITER,
};

/// Per-task gains `d_i ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGain {
    values: Vec<f64>,
}

impl DiagonalGain {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_gains(&values)?;
        Ok(Self { values })
    }

    pub fn uniform(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub(crate) fn check_gains(values: &[f64]) -> Result<()> {
    match values
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v < 1.0))
    {
        Some((index, &value)) => Err(Error::GainOutOfRange { index, value }),
        None => Ok(()),
    }
}

/// `d̂_i = source_i / target_i`, normalized so that `Σ d_i = 1`.
pub fn gain_from_distributions(
    source: &ProbabilityVector,
    target: &ProbabilityVector,
) -> Result<DiagonalGain> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            actual: source.dim(),
        });
    }
    if source.dim() == 1 {
        return Err(Error::DegenerateDimension);
    }
    if let Some((index, &value)) = target.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositiveTarget { index, value });
    }
    let raw: Vec<f64> = source
        .values()
        .iter()
        .zip(target.values())
        .map(|(s, t)| s / t)
        .collect();
    let total: f64 = raw.iter().sum();
    DiagonalGain::new(raw.into_iter().map(|v| v / total).collect())
}

/// `D P − D + I` for gains already known to lie in `(0, 1)`.
pub(crate) fn lazy_mix(p: &StochasticMatrix, gains: &[f64]) -> StochasticMatrix {
    let m = p.dim();
    let mut entries = Vec::with_capacity(m * m);
    for (i, &g) in gains.iter().enumerate() {
        entries.extend(p.row(i).iter().enumerate().map(|(j, &v)| {
            if i == j {
                g * v + (1.0 - g)
            } else {
                g * v
            }
        }));
    }
    StochasticMatrix::from_raw(m, entries)
}

/// `P̂ = D P − D + I`.
pub fn apply_gain(p: &StochasticMatrix, d: &DiagonalGain) -> Result<StochasticMatrix> {
    if p.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: d.dim(),
        });
    }
    Ok(lazy_mix(p, d.values()))
}

/// Which distribution feeds the numerator of `d̂`.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    /// Stationary vector of the input kernel; guarantees `stationary(P*) = p^d`.
    Stationary,
    /// A caller-provided distribution, typically the initial swarm state.
    Initial(ProbabilityVector),
}

/// Broadcast kernel together with the gain that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSynthesis {
    pub kernel: StochasticMatrix,
    /// `None` for a single task, where the kernel is returned unchanged.
    pub gain: Option<DiagonalGain>,
    pub source: ProbabilityVector,
}

pub fn synthesize(
    p: &StochasticMatrix,
    target: &ProbabilityVector,
    source: &GainSource,
    tol: f64,
) -> Result<CentralSynthesis> {
    let m = p.dim();
    if target.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: target.dim(),
        });
    }
    if let Some((index, &value)) = target.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositiveTarget { index, value });
    }
    if let Some(index) = (0..m).find(|&i| p.diagonal(i) <= 0.0) {
        return Err(Error::ZeroDiagonal { index });
    }
    if !is_irreducible(p) {
        return Err(Error::NotIrreducible);
    }

    let source = match source {
        GainSource::Stationary => stationary_distribution(p, tol, STATIONARY_MAX_ITER)?,
        GainSource::Initial(init) => init.clone(),
    };
    if m == 1 {
        return Ok(CentralSynthesis {
            kernel: p.clone(),
            gain: None,
            source,
        });
    }

    let gain = gain_from_distributions(&source, target)?;
    let kernel = apply_gain(p, &gain)?;
    if !check_sparsity_match(&kernel, p) {
        return Err(Error::SparsityViolation);
    }
    Ok(CentralSynthesis {
        kernel,
        gain: Some(gain),
        source,
    })
}

/// `P*` built from the stationary vector of `p`.
pub fn synthesize_central(
    p: &StochasticMatrix,
    target: &ProbabilityVector,
    tol: f64,
) -> Result<StochasticMatrix> {
    synthesize(p, target, &GainSource::Stationary, tol).map(|s| s.kernel)
}
