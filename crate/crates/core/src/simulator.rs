//! Swarm propagation under central or distributed control.
//!
//! Mean-field mode propagates task fractions deterministically (`p ← pK`);
//! agent mode moves a finite population by per-task multinomial draws.

use std::io::Write;
use std::num::NonZeroUsize;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::central::{synthesize, GainSource};
use crate::error::{Error, Result};
use crate::graph::{build_moore_grid, normalize_adjacency, TaskGraph};
use crate::measure::{feedback_step, FeedbackParams};
use crate::stochastic::{max_abs_diff, ProbabilityVector, StochasticMatrix, ROW_SUM_TOL};

/// Seed used when a scenario does not set one.
pub const DEFAULT_SEED: u64 = 0x5EED_0035;
pub const DEFAULT_OSCILLATION_WINDOW: usize = 50;
pub const DEFAULT_OSCILLATION_TOL: f64 = 1e-3;
/// Slack on the per-task stability condition `ζ_i ≤ 0`.
pub const ZETA_SLACK: f64 = 1e-12;

/// `p K` for a row-vector state.
pub fn step_meanfield(p: &ProbabilityVector, k: &StochasticMatrix) -> ProbabilityVector {
    let mut next = k.left_multiply(p.values());
    let sum: f64 = next.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        log::warn!("mean-field state drifted to total mass {sum}; renormalizing");
        next.iter_mut().for_each(|v| *v /= sum);
    }
    ProbabilityVector::from_raw(next)
}

/// Moves every agent independently according to its task's row of `k`.
/// Returns the new counts and the number of agents that changed task.
pub fn sample_transitions<R: rand::Rng + ?Sized>(
    counts: &[u64],
    k: &StochasticMatrix,
    rng: &mut R,
) -> (Vec<u64>, u64) {
    assert_eq!(counts.len(), k.dim(), "counts must match kernel dimension");
    let m = k.dim();
    let mut next = vec![0u64; m];
    let mut moved = 0u64;
    for (i, &n) in counts.iter().enumerate() {
        // multinomial draw as a chain of conditional binomials
        let mut remaining = n;
        let mut mass_left = 1.0;
        for (j, &pij) in k.row(i).iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let drawn = if j == m - 1 || pij >= mass_left {
                remaining
            } else if pij <= 0.0 {
                0
            } else {
                let q = (pij / mass_left).clamp(0.0, 1.0);
                Binomial::new(remaining, q)
                    .expect("probability clamped to [0, 1]")
                    .sample(rng)
            };
            next[j] += drawn;
            if j != i {
                moved += drawn;
            }
            remaining -= drawn;
            mass_left -= pij;
        }
    }
    (next, moved)
}

pub fn step_agents<R: rand::Rng + ?Sized>(
    counts: &[u64],
    k: &StochasticMatrix,
    rng: &mut R,
) -> Vec<u64> {
    sample_transitions(counts, k, rng).0
}

/// Expected fraction of agents that change task under `k`: `Σ p_i (1 − K_ii)`.
pub fn activity_level(p: &ProbabilityVector, k: &StochasticMatrix) -> f64 {
    p.values()
        .iter()
        .enumerate()
        .map(|(i, &pi)| pi * (1.0 - k.diagonal(i)))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovDiagnostics {
    /// `V = Σ (p^d_i − p_i)²` at the current epoch.
    pub v: f64,
    /// `V^{[k]} − V^{[k−1]}`.
    pub delta_v: f64,
    /// `Σ (2p^d_i − p_i^{[k]} − p_i^{[k−1]})(p_i^{[k−1]} − p_i^{[k]})`.
    pub delta_v_expansion: f64,
    /// `ζ_i = e_i^{[k]} Δe_i^{[k]}`.
    pub zeta: Vec<f64>,
    /// All `ζ_i ≤ 0` (within `ZETA_SLACK`).
    pub sufficient_ok: bool,
}

pub fn lyapunov_value(p: &[f64], target: &[f64]) -> f64 {
    p.iter().zip(target).map(|(a, b)| (b - a).powi(2)).sum()
}

pub fn lyapunov_diagnostics(
    prev: &ProbabilityVector,
    now: &ProbabilityVector,
    target: &ProbabilityVector,
) -> LyapunovDiagnostics {
    let (prev, now, target) = (prev.values(), now.values(), target.values());
    let v = lyapunov_value(now, target);
    let delta_v = v - lyapunov_value(prev, target);
    let delta_v_expansion = target
        .iter()
        .zip(now.iter().zip(prev))
        .map(|(d, (n, p))| (2.0 * d - n - p) * (p - n))
        .sum::<f64>();
    debug_assert!((delta_v - delta_v_expansion).abs() <= 1e-12);
    let zeta: Vec<f64> = target
        .iter()
        .zip(now.iter().zip(prev))
        .map(|(d, (n, p))| {
            let e_now = d - n;
            let e_prev = d - p;
            e_now * (e_now - e_prev)
        })
        .collect();
    let sufficient_ok = zeta.iter().all(|&z| z <= ZETA_SLACK);
    LyapunovDiagnostics {
        v,
        delta_v,
        delta_v_expansion,
        zeta,
        sufficient_ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillation {
    pub oscillating: bool,
    /// `max − min` of the error over the inspected epochs.
    pub amplitude: f64,
}

/// Inspects the last `2 · window` values of `errors`.
///
/// Oscillating means the error neither decreases monotonically nor stays
/// below `tol`, and its spread exceeds `tol`.
pub fn detect_oscillation_in(errors: &[f64], window: usize, tol: f64) -> Result<Oscillation> {
    let needed = 2 * window;
    if window == 0 || errors.len() < needed {
        return Err(Error::TraceTooShort {
            len: errors.len(),
            needed: needed.max(2),
        });
    }
    let tail = &errors[errors.len() - needed..];
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let settled = tail.iter().all(|&e| e < tol);
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let amplitude = hi - lo;
    Ok(Oscillation {
        oscillating: !decreasing && !settled && amplitude > tol,
        amplitude,
    })
}

pub fn detect_oscillation(trace: &SimulationTrace, window: usize, tol: f64) -> Result<Oscillation> {
    detect_oscillation_in(&trace.error_inf_series(), window, tol)
}

/// Where the base kernel `P` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Grid { rows: NonZeroUsize, cols: NonZeroUsize },
    Adjacency(TaskGraph),
    /// Hand-built kernel; its support plays the role of the graph.
    Kernel(StochasticMatrix),
}

impl GraphSpec {
    pub fn base_kernel(&self) -> StochasticMatrix {
        match self {
            GraphSpec::Grid { rows, cols } => normalize_adjacency(&build_moore_grid(*rows, *cols)),
            GraphSpec::Adjacency(g) => normalize_adjacency(g),
            GraphSpec::Kernel(k) => k.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// All agents on one task.
    OneHot(usize),
    Distribution(ProbabilityVector),
    /// Explicit agent counts; implies agent mode with `N = Σ counts`.
    Counts(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Central,
    Distributed(FeedbackParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    MeanField,
    Agents { n: u64, seed: u64 },
}

/// State the distributed controller observes in agent mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackSource {
    /// Empirical fractions `counts / N`.
    #[default]
    Observed,
    /// A mean-field shadow driven by the same kernels; isolates sampling noise.
    MeanField,
}

/// Source distribution for the central gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainChoice {
    #[default]
    Stationary,
    Initial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub graph: GraphSpec,
    pub initial: InitialState,
    pub target: ProbabilityVector,
    pub controller: Controller,
    pub epochs: u64,
    pub mode: Mode,
    pub feedback_source: FeedbackSource,
    pub gain_choice: GainChoice,
    pub stationary_tol: f64,
    /// Keep every applied kernel in the trace.
    pub record_kernels: bool,
}

impl ScenarioConfig {
    pub fn new(
        graph: GraphSpec,
        initial: InitialState,
        target: ProbabilityVector,
        controller: Controller,
        epochs: u64,
    ) -> Self {
        Self {
            graph,
            initial,
            target,
            controller,
            epochs,
            mode: Mode::MeanField,
            feedback_source: FeedbackSource::Observed,
            gain_choice: GainChoice::Stationary,
            stationary_tol: crate::stochastic::STATIONARY_TOL,
            record_kernels: false,
        }
    }

    pub fn validate(&self) -> Result<usize> {
        let m = self.graph.base_kernel().dim();
        if self.target.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.target.dim(),
            });
        }
        if let Some((index, &value)) =
            self.target.values().iter().enumerate().find(|(_, &v)| v <= 0.0)
        {
            return Err(Error::NonPositiveTarget { index, value });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter {
                name: "epochs",
                reason: "must be at least 1".into(),
            });
        }
        match &self.initial {
            InitialState::OneHot(i) if *i >= m => {
                return Err(Error::InvalidParameter {
                    name: "initial",
                    reason: format!("task {i} out of range for {m} tasks"),
                })
            }
            InitialState::Distribution(p) if p.dim() != m => {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: p.dim(),
                })
            }
            InitialState::Counts(c) if c.len() != m || c.iter().sum::<u64>() == 0 => {
                return Err(Error::InvalidParameter {
                    name: "initial",
                    reason: format!("counts must have {m} entries with a positive total"),
                })
            }
            _ => {}
        }
        if let Mode::Agents { n: 0, .. } = self.mode {
            return Err(Error::InvalidParameter {
                name: "mode",
                reason: "agent count must be positive".into(),
            });
        }
        if let Controller::Distributed(params) = &self.controller {
            params.validate()?;
        }
        Ok(m)
    }

    /// Initial allocation as fractions; `m` is the number of tasks.
    pub fn initial_fractions(&self, m: usize) -> ProbabilityVector {
        match &self.initial {
            InitialState::OneHot(i) => ProbabilityVector::one_hot(m, *i),
            InitialState::Distribution(p) => p.clone(),
            InitialState::Counts(c) => {
                let n: u64 = c.iter().sum();
                ProbabilityVector::from_raw(c.iter().map(|&x| x as f64 / n as f64).collect())
            }
        }
    }

    fn initial_counts(&self, m: usize, n: u64) -> Vec<u64> {
        match &self.initial {
            InitialState::Counts(c) => c.clone(),
            InitialState::OneHot(i) => {
                let mut c = vec![0; m];
                c[*i] = n;
                c
            }
            InitialState::Distribution(p) => place_agents(p, n),
        }
    }
}

/// Largest-remainder rounding of `n · p` to integer counts summing to `n`.
pub fn place_agents(p: &ProbabilityVector, n: u64) -> Vec<u64> {
    let exact: Vec<f64> = p.values().iter().map(|&v| v * n as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|&x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub k: u64,
    /// State after epoch `k`.
    pub p: ProbabilityVector,
    pub counts: Option<Vec<u64>>,
    pub error_inf: f64,
    pub error_l2: f64,
    pub lyapunov: LyapunovDiagnostics,
    /// Fraction of agents that changed task during epoch `k`.
    pub activity: f64,
    /// `β^{[k]}`; `None` under central control.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub p_star: StochasticMatrix,
    pub target: ProbabilityVector,
    pub initial: ProbabilityVector,
    pub records: Vec<EpochRecord>,
    /// Kernel applied at each epoch, when requested.
    pub kernels: Vec<StochasticMatrix>,
}

impl SimulationTrace {
    pub fn error_inf_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error_inf).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// First epoch whose `error_inf` is at or below `threshold`.
    pub fn epochs_to_reach(&self, threshold: f64) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.error_inf <= threshold)
            .map(|r| r.k)
    }

    /// Writes the trace as CSV. Per-state columns `p_0..p_{M−1}` are appended
    /// when `per_state` is set.
    pub fn write_csv<W: Write>(&self, writer: W, per_state: bool) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = TRACE_COLUMNS.iter().map(|s| s.to_string()).collect();
        if per_state {
            header.extend((0..self.target.dim()).map(|i| format!("p_{i}")));
        }
        out.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.k.to_string(),
                r.error_inf.to_string(),
                r.error_l2.to_string(),
                r.lyapunov.v.to_string(),
                r.lyapunov.delta_v.to_string(),
                r.activity.to_string(),
                r.beta.map(|b| b.to_string()).unwrap_or_default(),
                r.lyapunov.sufficient_ok.to_string(),
            ];
            if per_state {
                row.extend(r.p.values().iter().map(f64::to_string));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Fixed leading CSV columns.
pub const TRACE_COLUMNS: [&str; 8] = [
    "k",
    "error_inf",
    "error_l2",
    "V",
    "delta_V",
    "activity",
    "beta",
    "sufficient_ok",
];

/// A run stopped by an error; carries the epochs completed so far.
#[derive(Debug, Clone, thiserror::Error)]
#[error("scenario aborted after {} epochs: {error}", partial.as_ref().map_or(0, |t| t.records.len()))]
pub struct Aborted {
    pub error: Error,
    pub partial: Option<Box<SimulationTrace>>,
}

impl From<Error> for Aborted {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: None,
        }
    }
}

fn error_norms(p: &[f64], target: &[f64]) -> (f64, f64) {
    let inf = max_abs_diff(p, target);
    let l2 = lyapunov_value(p, target).sqrt();
    (inf, l2)
}

/// Runs a scenario epoch by epoch. Kernels act in chronological order,
/// `p^{[k]} = p^{[0]} K^{[1]} … K^{[k]}`.
pub fn run_scenario(cfg: &ScenarioConfig) -> std::result::Result<SimulationTrace, Aborted> {
    let m = cfg.validate()?;
    let base = cfg.graph.base_kernel();
    let initial = cfg.initial_fractions(m);
    let source = match cfg.gain_choice {
        GainChoice::Stationary => GainSource::Stationary,
        GainChoice::Initial => GainSource::Initial(initial.clone()),
    };
    let p_star = synthesize(&base, &cfg.target, &source, cfg.stationary_tol)?.kernel;

    let mode = match (&cfg.initial, cfg.mode) {
        (InitialState::Counts(c), Mode::MeanField) => Mode::Agents {
            n: c.iter().sum(),
            seed: DEFAULT_SEED,
        },
        (_, mode) => mode,
    };
    let mut rng = match mode {
        Mode::Agents { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Mode::MeanField => None,
    };
    let mut counts = match mode {
        Mode::Agents { n, .. } => Some(cfg.initial_counts(m, n)),
        Mode::MeanField => None,
    };

    let mut trace = SimulationTrace {
        p_star: p_star.clone(),
        target: cfg.target.clone(),
        initial: initial.clone(),
        records: Vec::with_capacity(cfg.epochs.min(1 << 16) as usize),
        kernels: Vec::new(),
    };
    let mut p = match &counts {
        Some(c) => fractions_of(c),
        None => initial.clone(),
    };
    let mut shadow = p.clone();

    for k in 1..=cfg.epochs {
        let (kernel, beta) = match &cfg.controller {
            Controller::Central => (p_star.clone(), None),
            Controller::Distributed(params) => {
                let observed = match (cfg.feedback_source, &counts) {
                    (FeedbackSource::MeanField, Some(_)) => &shadow,
                    _ => &p,
                };
                match feedback_step(&p_star, observed, &cfg.target, params, k) {
                    Ok(step) => (step.kernel, Some(step.beta)),
                    Err(error) => {
                        return Err(Aborted {
                            error,
                            partial: Some(Box::new(trace)),
                        })
                    }
                }
            }
        };

        let (next, activity) = match (&mut counts, &mut rng) {
            (Some(c), Some(rng)) => {
                let n: u64 = c.iter().sum();
                let (next_counts, moved) = sample_transitions(c, &kernel, rng);
                *c = next_counts;
                (fractions_of(c), moved as f64 / n as f64)
            }
            _ => (step_meanfield(&p, &kernel), activity_level(&p, &kernel)),
        };
        if counts.is_some() {
            shadow = step_meanfield(&shadow, &kernel);
        }

        let lyapunov = lyapunov_diagnostics(&p, &next, &cfg.target);
        let (error_inf, error_l2) = error_norms(next.values(), cfg.target.values());
        trace.records.push(EpochRecord {
            k,
            p: next.clone(),
            counts: counts.clone(),
            error_inf,
            error_l2,
            lyapunov,
            activity,
            beta,
        });
        if cfg.record_kernels {
            trace.kernels.push(kernel);
        }
        p = next;
    }
    Ok(trace)
}

fn fractions_of(counts: &[u64]) -> ProbabilityVector {
    let n: u64 = counts.iter().sum();
    ProbabilityVector::from_raw(counts.iter().map(|&c| c as f64 / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::BetaSchedule;
    use crate::stochastic::{stationary_distribution, STATIONARY_TOL};
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn pstar2() -> StochasticMatrix {
        StochasticMatrix::from_rows(vec![vec![0.625, 0.375], vec![0.125, 0.875]]).unwrap()
    }

    fn uniform2() -> StochasticMatrix {
        StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn meanfield_step_examples() {
        let next = step_meanfield(&pv(&[1.0, 0.0]), &pstar2());
        assert_eq!(next.values(), &[0.625, 0.375]);
        let pi = stationary_distribution(&pstar2(), STATIONARY_TOL, 100).unwrap();
        let again = step_meanfield(&pi, &pstar2());
        assert!(again.max_abs_diff(&pi) < 1e-12);
        let id = step_meanfield(&pv(&[0.5, 0.5]), &StochasticMatrix::identity(2));
        assert_eq!(id.values(), &[0.5, 0.5]);
    }

    #[test]
    fn agents_under_identity_stay() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, moved) = sample_transitions(&[1000, 0], &StochasticMatrix::identity(2), &mut rng);
        assert_eq!(next, vec![1000, 0]);
        assert_eq!(moved, 0);
    }

    #[test]
    fn agent_binomial_within_three_sigma() {
        let n = 1_000_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        let next = step_agents(&[n, 0], &uniform2(), &mut rng);
        assert_eq!(next.iter().sum::<u64>(), n);
        let frac = next[0] as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.0015, "{frac}");
    }

    #[test]
    fn agent_sampling_is_seeded() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            step_agents(&[500, 300], &pstar2(), &mut rng)
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn activity_examples() {
        assert_eq!(activity_level(&pv(&[0.3, 0.7]), &StochasticMatrix::identity(2)), 0.0);
        assert_abs_diff_eq!(activity_level(&pv(&[0.5, 0.5]), &pstar2()), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_examples() {
        let t = pv(&[0.25, 0.75]);
        let d = lyapunov_diagnostics(&t, &t, &t);
        assert_eq!((d.v, d.delta_v), (0.0, 0.0));
        assert!(d.zeta.iter().all(|&z| z == 0.0) && d.sufficient_ok);

        let d = lyapunov_diagnostics(&pv(&[1.0, 0.0]), &pv(&[0.625, 0.375]), &t);
        assert_abs_diff_eq!(d.v, 0.28125, epsilon = 1e-15);
        assert_abs_diff_eq!(d.delta_v, -0.84375, epsilon = 1e-15);
        assert_abs_diff_eq!(d.delta_v_expansion, -0.84375, epsilon = 1e-15);
        // e moves from (-0.75, 0.75) to (-0.375, 0.375): both shrink
        assert!(d.sufficient_ok);

        let over = lyapunov_diagnostics(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), &t);
        assert!(!over.sufficient_ok);
    }

    #[test]
    fn oscillation_detection() {
        let flat = vec![0.0; 100];
        let o = detect_oscillation_in(&flat, 50, 1e-3).unwrap();
        assert!(!o.oscillating);

        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.1 } else { 0.3 }).collect();
        let o = detect_oscillation_in(&alt, 50, 1e-3).unwrap();
        assert!(o.oscillating);
        assert_abs_diff_eq!(o.amplitude, 0.2, epsilon = 1e-15);

        let decay: Vec<f64> = (0..100).map(|i| 0.5 * 0.9f64.powi(i)).collect();
        assert!(!detect_oscillation_in(&decay, 50, 1e-3).unwrap().oscillating);

        assert_eq!(
            detect_oscillation_in(&alt[..99], 50, 1e-3).unwrap_err(),
            Error::TraceTooShort { len: 99, needed: 100 }
        );
    }

    #[test]
    fn placement_rounds_to_total() {
        let c = place_agents(&pv(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]), 10);
        assert_eq!(c.iter().sum::<u64>(), 10);
        assert_eq!(c, vec![4, 3, 3]);
        assert_eq!(place_agents(&pv(&[0.25, 0.75]), 4), vec![1, 3]);
    }

    fn two_state(controller: Controller, initial: InitialState, epochs: u64) -> ScenarioConfig {
        ScenarioConfig::new(
            GraphSpec::Kernel(uniform2()),
            initial,
            pv(&[0.25, 0.75]),
            controller,
            epochs,
        )
    }

    #[test]
    fn central_two_state_converges() {
        let trace = run_scenario(&two_state(Controller::Central, InitialState::OneHot(0), 200))
            .unwrap();
        assert_eq!(trace.records.len(), 200);
        assert!(trace.last().unwrap().error_inf < 1e-6);
        assert_eq!(trace.records[0].p.values(), &[0.625, 0.375]);
        assert!(trace.records.iter().all(|r| r.beta.is_none()));
    }

    #[test]
    fn distributed_fixed_point_stays_put() {
        let params =
            FeedbackParams::new(0.02, 0.2, BetaSchedule::InverseK { gamma: 600.0 }).unwrap();
        let cfg = two_state(
            Controller::Distributed(params),
            InitialState::Distribution(pv(&[0.25, 0.75])),
            20,
        );
        let trace = run_scenario(&cfg).unwrap();
        let steady = 0.2 * activity_level(&cfg.target, &trace.p_star);
        for r in &trace.records {
            assert!(r.p.max_abs_diff(&cfg.target) < 1e-12);
            assert_abs_diff_eq!(r.activity, steady, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut cfg = two_state(Controller::Central, InitialState::OneHot(5), 10);
        assert!(run_scenario(&cfg).is_err());
        cfg.initial = InitialState::OneHot(0);
        cfg.epochs = 0;
        assert!(run_scenario(&cfg).is_err());
        cfg.epochs = 1;
        cfg.mode = Mode::Agents { n: 0, seed: 1 };
        assert!(run_scenario(&cfg).is_err());
    }

    #[test]
    fn literal_gain_with_one_hot_start_aborts() {
        let mut cfg = two_state(Controller::Central, InitialState::OneHot(0), 10);
        cfg.gain_choice = GainChoice::Initial;
        let err = run_scenario(&cfg).unwrap_err();
        assert!(matches!(err.error, Error::GainOutOfRange { .. }));
    }

    #[test]
    fn csv_layout() {
        let trace = run_scenario(&two_state(Controller::Central, InitialState::OneHot(0), 3))
            .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,error_inf,error_l2,V,delta_V,activity,beta,sufficient_ok,p_0,p_1"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 10);
        assert_eq!(first[0], "1");
        assert_eq!(first[6], "");
        assert_eq!(first[8], "0.625");
        assert_eq!(text.lines().count(), 4);
    }
}
