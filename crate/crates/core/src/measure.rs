//! Language-measure state values and the local feedback controller.
//!
//! Each epoch the swarm error `χ = p^d − p` is weighted into a discounted
//! state value `ν_θ = θ[I − (1−θ)P*]⁻¹χ`. The gap `μ = ν − χ` drives a sigmoid
//! activity level `b_i ∈ (0, 1)` per task, and agents at task `i` follow the
//! broadcast policy with probability `b_i` (otherwise they stay put).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::central::{check_gains, lazy_mix};
use crate::error::{Error, Result};
use crate::stochastic::{
    stationary_distribution, ProbabilityVector, StochasticMatrix, STATIONARY_MAX_ITER,
    STATIONARY_TOL,
};

/// Discount parameter used for the swarm experiments.
pub const DEFAULT_THETA: f64 = 0.02;
pub const DEFAULT_MEASURE_TOL: f64 = 1e-10;

/// Exponent clamp for the sigmoid; keeps `exp` finite.
const EXP_CLAMP: f64 = 700.0;
/// Activity levels are kept inside `[ε, 1 − ε]`.
pub const ACTIVITY_EPS: f64 = 1e-12;

/// Signed per-task weights with `|χ_i| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicVector {
    values: Vec<f64>,
}

impl CharacteristicVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= 1.0))
        {
            return Err(Error::InvalidParameter {
                name: "chi",
                reason: format!("entry {i} = {v} is outside [-1, 1]"),
            });
        }
        Ok(Self { values })
    }

    /// `χ_i = p^d_i − p_i`.
    pub fn from_error(target: &ProbabilityVector, current: &ProbabilityVector) -> Result<Self> {
        if target.dim() != current.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                actual: current.dim(),
            });
        }
        Ok(Self {
            values: target
                .values()
                .iter()
                .zip(current.values())
                .map(|(t, c)| t - c)
                .collect(),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-task language measure `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector {
    values: Vec<f64>,
}

impl MeasureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        crate::stochastic::max_abs_diff(&self.values, &other.values)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("{theta} is outside (0, 1)"),
        })
    }
}

fn check_dims(p: &StochasticMatrix, chi: &CharacteristicVector) -> Result<()> {
    if p.dim() == chi.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: chi.dim(),
        })
    }
}

/// Solves `[I − (1−θ)P] ν = θχ` densely.
pub fn measure_direct(
    p: &StochasticMatrix,
    chi: &CharacteristicVector,
    theta: f64,
) -> Result<MeasureVector> {
    check_theta(theta)?;
    check_dims(p, chi)?;
    let m = p.dim();
    let a = DMatrix::identity(m, m) - p.to_nalgebra() * (1.0 - theta);
    let rhs = DVector::from_iterator(m, chi.values().iter().map(|c| theta * c));
    let sol = a.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(MeasureVector {
        values: sol.iter().copied().collect(),
    })
}

/// Synchronous fixed-point sweeps `ν_i ← (1−θ) Σ_{j∈Nb(i)} P_ij ν_j + θχ_i`
/// starting from `ν = 0`, stopping once a sweep changes no entry by more
/// than `tol`. Also returns the number of sweeps performed.
pub fn measure_iterative_with_sweeps(
    p: &StochasticMatrix,
    chi: &CharacteristicVector,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(MeasureVector, usize)> {
    check_theta(theta)?;
    check_dims(p, chi)?;
    let m = p.dim();
    // Nb(i) comes from the support of the kernel itself.
    let neighbourhoods: Vec<Vec<(usize, f64)>> = (0..m).map(|i| p.neighbors(i).collect()).collect();
    let decay = 1.0 - theta;

    let mut old = vec![0.0; m];
    let mut new = vec![0.0; m];
    let mut change = f64::INFINITY;
    for sweep in 1..=max_iter {
        change = 0.0;
        for (i, nb) in neighbourhoods.iter().enumerate() {
            let expected: f64 = nb.iter().map(|&(j, w)| w * old[j]).sum();
            new[i] = decay * expected + theta * chi.values()[i];
            change = f64::max(change, (new[i] - old[i]).abs());
        }
        std::mem::swap(&mut old, &mut new);
        if change <= tol {
            return Ok((MeasureVector { values: old }, sweep));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: change,
    })
}

pub fn measure_iterative(
    p: &StochasticMatrix,
    chi: &CharacteristicVector,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MeasureVector> {
    measure_iterative_with_sweeps(p, chi, theta, tol, max_iter).map(|(nu, _)| nu)
}

/// Sweep budget for `measure_iterative`: twice the contraction bound for
/// `‖χ‖_∞ ≤ 1`.
pub fn default_measure_max_iter(theta: f64, tol: f64) -> usize {
    let bound = ((tol * theta).ln() / (1.0 - theta).ln()).ceil() + 1.0;
    2 * (bound.max(1.0) as usize)
}

/// `θ → 0⁺` limit of the measure: `(π·χ) 𝟙` with `π` stationary for `p`.
pub fn cesaro_measure(p: &StochasticMatrix, chi: &CharacteristicVector) -> Result<MeasureVector> {
    check_dims(p, chi)?;
    let pi = stationary_distribution(p, STATIONARY_TOL, STATIONARY_MAX_ITER)?;
    let mean: f64 = pi.values().iter().zip(chi.values()).map(|(a, b)| a * b).sum();
    Ok(MeasureVector {
        values: vec![mean; p.dim()],
    })
}

/// `f_λ(μ) = 1 / (1 + (1/λ − 1) e^{−βμ})`, written as `λ / (λ + (1−λ) e^{−βμ})`
/// so that `f_λ(0) = λ` holds exactly.
pub fn sigmoid_activity(mu: f64, lambda: f64, beta: f64) -> f64 {
    debug_assert!(lambda > 0.0 && lambda < 1.0);
    debug_assert!(beta > 0.0);
    let decay = (-beta * mu).clamp(-EXP_CLAMP, EXP_CLAMP).exp();
    let f = lambda / (lambda + (1.0 - lambda) * decay);
    f.clamp(ACTIVITY_EPS, 1.0 - ACTIVITY_EPS)
}

/// Per-epoch sigmoid sharpness `β^{[k]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSchedule {
    Constant { gamma: f64 },
    InverseK { gamma: f64 },
    Exponential { gamma: f64, decay_horizon: u32 },
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        let gamma = match *self {
            BetaSchedule::Constant { gamma } | BetaSchedule::InverseK { gamma } => gamma,
            BetaSchedule::Exponential {
                gamma,
                decay_horizon,
            } => {
                if decay_horizon == 0 {
                    return Err(Error::InvalidParameter {
                        name: "decay_horizon",
                        reason: "must be positive".into(),
                    });
                }
                gamma
            }
        };
        if gamma > 0.0 && gamma.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("{gamma} is not a positive finite number"),
            })
        }
    }

    /// `β` at epoch `k ≥ 1`.
    pub fn beta_at(&self, k: u64) -> f64 {
        debug_assert!(k >= 1, "epochs are numbered from 1");
        match *self {
            BetaSchedule::Constant { gamma } => gamma,
            BetaSchedule::InverseK { gamma } => gamma / k as f64,
            BetaSchedule::Exponential {
                gamma,
                decay_horizon,
            } => gamma * (-(k as f64) / f64::from(decay_horizon)).exp(),
        }
    }
}

pub fn beta_at(schedule: &BetaSchedule, k: u64) -> f64 {
    schedule.beta_at(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackParams {
    pub theta: f64,
    /// Steady-state activity level.
    pub lambda: f64,
    pub schedule: BetaSchedule,
    pub measure_tol: f64,
    pub measure_max_iter: usize,
}

impl FeedbackParams {
    pub fn new(theta: f64, lambda: f64, schedule: BetaSchedule) -> Result<Self> {
        let params = Self {
            theta,
            lambda,
            schedule,
            measure_tol: DEFAULT_MEASURE_TOL,
            measure_max_iter: default_measure_max_iter(theta, DEFAULT_MEASURE_TOL),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("{} is outside (0, 1)", self.lambda),
            });
        }
        if !(self.measure_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "measure_tol",
                reason: "must be positive".into(),
            });
        }
        if self.measure_max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "measure_max_iter",
                reason: "must be positive".into(),
            });
        }
        self.schedule.validate()
    }
}

/// `P̃ = B P* − B + I` with `B = diag(b)`, every `b_i ∈ (0, 1)`.
pub fn feedback_kernel(p_star: &StochasticMatrix, b: &[f64]) -> Result<StochasticMatrix> {
    if p_star.dim() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: p_star.dim(),
            actual: b.len(),
        });
    }
    check_gains(b)?;
    Ok(lazy_mix(p_star, b))
}

/// Kernel and intermediate quantities of one feedback epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackStep {
    pub kernel: StochasticMatrix,
    pub chi: CharacteristicVector,
    pub nu: MeasureVector,
    /// `μ = ν − χ`.
    pub mu: Vec<f64>,
    pub activity: Vec<f64>,
    pub beta: f64,
}

/// One round of the distributed policy at epoch `k ≥ 1`.
pub fn feedback_step(
    p_star: &StochasticMatrix,
    p_now: &ProbabilityVector,
    p_target: &ProbabilityVector,
    params: &FeedbackParams,
    k: u64,
) -> Result<FeedbackStep> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "epochs are numbered from 1".into(),
        });
    }
    if p_now.dim() != p_star.dim() {
        return Err(Error::DimensionMismatch {
            expected: p_star.dim(),
            actual: p_now.dim(),
        });
    }
    let chi = CharacteristicVector::from_error(p_target, p_now)?;
    let nu = measure_iterative(
        p_star,
        &chi,
        params.theta,
        params.measure_tol,
        params.measure_max_iter,
    )?;
    let mu: Vec<f64> = nu
        .values()
        .iter()
        .zip(chi.values())
        .map(|(n, c)| n - c)
        .collect();
    let beta = params.schedule.beta_at(k);
    let activity: Vec<f64> = mu
        .iter()
        .map(|&m| sigmoid_activity(m, params.lambda, beta))
        .collect();
    let kernel = feedback_kernel(p_star, &activity)?;
    Ok(FeedbackStep {
        kernel,
        chi,
        nu,
        mu,
        activity,
        beta,
    })
}

/// Modulus of the second largest eigenvalue of `p`. Reported as a
/// diagnostic only.
pub fn second_eigenvalue_modulus(p: &StochasticMatrix) -> f64 {
    if p.dim() < 2 {
        return 0.0;
    }
    let mut moduli: Vec<f64> = p
        .to_nalgebra()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::apply_gain;
    use crate::central::DiagonalGain;
    use crate::stochastic::stationary_distribution;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn chi(v: &[f64]) -> CharacteristicVector {
        CharacteristicVector::new(v.to_vec()).unwrap()
    }

    fn uniform2() -> StochasticMatrix {
        m(&[&[0.5, 0.5], &[0.5, 0.5]])
    }

    fn pstar2() -> StochasticMatrix {
        m(&[&[0.625, 0.375], &[0.125, 0.875]])
    }

    #[test]
    fn direct_measure_examples() {
        let nu = measure_direct(&uniform2(), &chi(&[1.0, -1.0]), 0.5).unwrap();
        assert_abs_diff_eq!(nu.values(), &[0.5, -0.5][..], epsilon = 1e-14);

        let nu = measure_direct(&pstar2(), &CharacteristicVector::zeros(2), 0.3).unwrap();
        assert_eq!(nu.values(), &[0.0, 0.0]);

        let c = chi(&[0.3, -0.7]);
        let nu = measure_direct(&pstar2(), &c, 1.0 - 1e-9).unwrap();
        assert_abs_diff_eq!(nu.values(), c.values(), epsilon = 1e-6);

        assert!(measure_direct(&pstar2(), &c, 0.0).is_err());
        assert!(measure_direct(&pstar2(), &c, 1.0).is_err());
        assert!(measure_direct(&pstar2(), &chi(&[0.1]), 0.5).is_err());
    }

    #[test]
    fn iterative_measure_examples() {
        let nu =
            measure_iterative(&uniform2(), &chi(&[1.0, -1.0]), 0.5, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(nu.values(), &[0.5, -0.5][..], epsilon = 1e-8);

        let (nu, sweeps) = measure_iterative_with_sweeps(
            &pstar2(),
            &CharacteristicVector::zeros(2),
            0.02,
            1e-10,
            10,
        )
        .unwrap();
        assert_eq!(sweeps, 1);
        assert_eq!(nu.values(), &[0.0, 0.0]);

        assert!(matches!(
            measure_iterative(&pstar2(), &chi(&[1.0, -1.0]), 0.02, 1e-10, 3),
            Err(Error::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn cesaro_examples() {
        let nu = cesaro_measure(&uniform2(), &chi(&[1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(nu.values(), &[0.0, 0.0][..], epsilon = 1e-14);
        let nu = cesaro_measure(&pstar2(), &chi(&[0.4, 0.4])).unwrap();
        assert_abs_diff_eq!(nu.values(), &[0.4, 0.4][..], epsilon = 1e-14);
    }

    #[test]
    fn sigmoid_examples() {
        for beta in [0.1, 1.0, 600.0] {
            assert_eq!(sigmoid_activity(0.0, 0.2, beta), 0.2);
        }
        assert_abs_diff_eq!(sigmoid_activity(3f64.ln(), 0.5, 1.0), 0.75, epsilon = 1e-15);
        let hi = sigmoid_activity(1e6, 0.2, 600.0);
        let lo = sigmoid_activity(-1e6, 0.2, 600.0);
        assert!(hi < 1.0 && hi > 1.0 - 1e-9);
        assert!(lo > 0.0 && lo < 1e-9);
        assert!(sigmoid_activity(0.01, 0.2, 1.0) > 0.2);
        assert!(sigmoid_activity(-0.01, 0.2, 1.0) < 0.2);
    }

    #[test]
    fn beta_schedules() {
        let inv = BetaSchedule::InverseK { gamma: 600.0 };
        assert_eq!(inv.beta_at(1), 600.0);
        assert_eq!(inv.beta_at(600), 1.0);
        let exp = BetaSchedule::Exponential {
            gamma: 2000.0,
            decay_horizon: 100,
        };
        assert_abs_diff_eq!(exp.beta_at(100), 2000.0 / std::f64::consts::E, epsilon = 1e-9);
        assert_abs_diff_eq!(exp.beta_at(100), 735.758_882_342_885, epsilon = 1e-9);
        let c = BetaSchedule::Constant { gamma: 600.0 };
        assert!([1, 7, 10_000].iter().all(|&k| c.beta_at(k) == 600.0));

        assert!(BetaSchedule::Constant { gamma: 0.0 }.validate().is_err());
        assert!(BetaSchedule::Exponential {
            gamma: 1.0,
            decay_horizon: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn feedback_kernel_examples() {
        let k = feedback_kernel(&pstar2(), &[0.2, 0.2]).unwrap();
        assert_abs_diff_eq!(k.entries(), &[0.925, 0.075, 0.025, 0.975][..], epsilon = 1e-15);

        let lam = 0.2;
        let steady = feedback_kernel(&pstar2(), &[lam, lam]).unwrap();
        let same = apply_gain(&pstar2(), &DiagonalGain::uniform(2, lam).unwrap()).unwrap();
        assert_eq!(steady, same);
        let a = stationary_distribution(&steady, 1e-12, 100).unwrap();
        let b = stationary_distribution(&pstar2(), 1e-12, 100).unwrap();
        assert_abs_diff_eq!(a.values(), b.values(), epsilon = 1e-12);

        assert!(matches!(
            feedback_kernel(&pstar2(), &[0.2, 1.0]),
            Err(Error::GainOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn feedback_step_at_target_is_steady_state_kernel() {
        let target = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        let params = FeedbackParams::new(0.02, 0.2, BetaSchedule::Constant { gamma: 600.0 })
            .unwrap();
        let step = feedback_step(&pstar2(), &target, &target, &params, 1).unwrap();
        assert_eq!(step.chi.values(), &[0.0, 0.0]);
        assert_eq!(step.nu.values(), &[0.0, 0.0]);
        assert_eq!(step.mu, vec![0.0, 0.0]);
        assert_eq!(step.activity, vec![0.2, 0.2]);
        assert_abs_diff_eq!(
            step.kernel.entries(),
            &[0.925, 0.075, 0.025, 0.975][..],
            epsilon = 1e-15
        );
        assert!(feedback_step(&pstar2(), &target, &target, &params, 0).is_err());
    }

    #[test]
    fn feedback_step_two_state_frozen() {
        // Frozen from an independent dense-solve script.
        let p_now = ProbabilityVector::one_hot(2, 0);
        let target = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        let params = FeedbackParams::new(0.02, 0.2, BetaSchedule::Constant { gamma: 1.0 })
            .unwrap();
        let step = feedback_step(&pstar2(), &p_now, &target, &params, 1).unwrap();
        assert_eq!(step.chi.values(), &[-0.75, 0.75]);
        assert_abs_diff_eq!(
            step.nu.values(),
            &[0.3308823529411756, 0.3897058823529402][..],
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            &step.mu[..],
            &[1.0808823529411755, -0.3602941176470598][..],
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            &step.activity[..],
            &[0.42423500883714355, 0.14847800741412898][..],
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            step.kernel.entries(),
            &[0.8409118716860712, 0.15908812831392882, 0.01855975092676612, 0.9814402490732339][..],
            epsilon = 1e-8
        );
        assert_eq!(step.beta, 1.0);
    }

    #[test]
    fn second_eigenvalue_of_two_state() {
        // eigenvalues of [[0.625,0.375],[0.125,0.875]] are 1 and 0.5
        assert_abs_diff_eq!(second_eigenvalue_modulus(&pstar2()), 0.5, epsilon = 1e-12);
        assert_eq!(second_eigenvalue_modulus(&StochasticMatrix::identity(1)), 0.0);
    }

    #[test]
    fn default_sweep_budget() {
        let n = default_measure_max_iter(0.02, 1e-10);
        assert!(n > 2000 && n < 3000, "{n}");
    }
}
