use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use taskswarm::simulator::{DEFAULT_OSCILLATION_TOL, DEFAULT_OSCILLATION_WINDOW, DEFAULT_SEED};
use taskswarm::{
    check_sparsity_match, normalize_adjacency, BetaSchedule, Controller, FeedbackParams,
    FeedbackSource, GainChoice, GraphSpec, InitialState, Mode, ProbabilityVector,
    ScenarioConfig, StochasticMatrix, TaskGraph,
};

use crate::CliError;

/// Largest grid the dense kernels are allowed to reach.
pub const MAX_TASKS: usize = 4096;

/// Scenario file. Every section except `graph` is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub graph: GraphSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either `rows`/`cols` for a Moore grid, or an explicit `adjacency`, optionally
/// with a hand-built `kernel` on the same support.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<TaskGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<StochasticMatrix>,
}

/// Exactly one of the fields; defaults to task 0.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub task: Option<usize>,
    pub distribution: Option<Vec<f64>>,
    pub counts: Option<Vec<u64>>,
}

/// Uniform unless `distribution` is given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub uniform: Option<bool>,
    pub distribution: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Central,
    Distributed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GainSourceArg {
    #[default]
    Stationary,
    Initial,
}

impl From<GainSourceArg> for GainChoice {
    fn from(g: GainSourceArg) -> Self {
        match g {
            GainSourceArg::Stationary => GainChoice::Stationary,
            GainSourceArg::Initial => GainChoice::Initial,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default)]
    pub kind: ControllerKind,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub beta: Option<BetaSchedule>,
    pub measure_tol: Option<f64>,
    pub measure_max_iter: Option<usize>,
    #[serde(default)]
    pub gain_source: GainSourceArg,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Central,
            theta: default_theta(),
            lambda: default_lambda(),
            beta: None,
            measure_tol: None,
            measure_max_iter: None,
            gain_source: GainSourceArg::Stationary,
        }
    }
}

fn default_theta() -> f64 {
    taskswarm::measure::DEFAULT_THETA
}

fn default_lambda() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSourceArg {
    #[default]
    Observed,
    MeanField,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_epochs")]
    pub epochs: u64,
    #[serde(default)]
    pub mode: ModeArg,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub feedback_source: FeedbackSourceArg,
    #[serde(default = "default_window")]
    pub oscillation_window: usize,
    #[serde(default = "default_osc_tol")]
    pub oscillation_tol: f64,
    #[serde(default = "default_true")]
    pub per_state_columns: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            mode: ModeArg::MeanField,
            seed: DEFAULT_SEED,
            feedback_source: FeedbackSourceArg::Observed,
            oscillation_window: DEFAULT_OSCILLATION_WINDOW,
            oscillation_tol: DEFAULT_OSCILLATION_TOL,
            per_state_columns: true,
        }
    }
}

fn default_epochs() -> u64 {
    500
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_window() -> usize {
    DEFAULT_OSCILLATION_WINDOW
}
fn default_osc_tol() -> f64 {
    DEFAULT_OSCILLATION_TOL
}
fn default_true() -> bool {
    true
}

/// Output paths, resolved against the config file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: Option<PathBuf>,
    pub synthesis: Option<PathBuf>,
}

/// `meanfield` or `agents:N`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub enum ModeArg {
    #[default]
    MeanField,
    Agents(u64),
}

impl FromStr for ModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("meanfield") {
            return Ok(ModeArg::MeanField);
        }
        match s.split_once(':') {
            Some((head, n)) if head.eq_ignore_ascii_case("agents") => match n.trim().parse::<u64>() {
                Ok(n) if n > 0 => Ok(ModeArg::Agents(n)),
                _ => Err(format!("agent count in `{s}` must be a positive integer")),
            },
            _ => Err(format!("unknown mode `{s}`, expected `meanfield` or `agents:N`")),
        }
    }
}

impl TryFrom<String> for ModeArg {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gain_source: Option<GainSourceArg>,
    pub mode: Option<ModeArg>,
}

/// A parsed scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub oscillation_window: usize,
    pub oscillation_tol: f64,
    pub per_state_columns: bool,
    pub trace_path: Option<PathBuf>,
    pub synthesis_path: Option<PathBuf>,
}

fn field(name: impl Into<String>, message: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {message}", name.into()))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Input(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks every section and builds the library scenario. `base_dir`
    /// anchors relative output paths.
    pub fn into_scenario(self, overrides: Overrides, base_dir: &Path) -> Result<Scenario, CliError> {
        let graph = self.graph.to_spec()?;
        let m = graph.base_kernel().dim();

        let initial = self.initial.to_state(m)?;
        let target = self.target.to_distribution(m)?;

        let c = &self.controller;
        let controller = match c.kind {
            ControllerKind::Central => Controller::Central,
            ControllerKind::Distributed => {
                let schedule = c
                    .beta
                    .ok_or_else(|| field("controller.beta", "required for distributed control"))?;
                let mut params = FeedbackParams::new(c.theta, c.lambda, schedule)
                    .map_err(|e| field("controller", e))?;
                if let Some(tol) = c.measure_tol {
                    params.measure_tol = tol;
                }
                if let Some(max_iter) = c.measure_max_iter {
                    params.measure_max_iter = max_iter;
                }
                params.validate().map_err(|e| field("controller", e))?;
                Controller::Distributed(params)
            }
        };

        let run = &self.run;
        if run.oscillation_window == 0 {
            return Err(field("run.oscillation_window", "must be at least 1"));
        }
        if !(run.oscillation_tol.is_finite() && run.oscillation_tol >= 0.0) {
            return Err(field("run.oscillation_tol", "must be a non-negative number"));
        }
        let seed = overrides.seed.unwrap_or(run.seed);
        let mode = match overrides.mode.unwrap_or(run.mode) {
            ModeArg::MeanField => Mode::MeanField,
            ModeArg::Agents(n) => Mode::Agents { n, seed },
        };
        let mode = match (&initial, mode) {
            (InitialState::Counts(c), Mode::MeanField) => Mode::Agents { n: c.iter().sum(), seed },
            (_, mode) => mode,
        };

        let mut config = ScenarioConfig::new(graph, initial, target, controller, run.epochs);
        config.mode = mode;
        config.feedback_source = match run.feedback_source {
            FeedbackSourceArg::Observed => FeedbackSource::Observed,
            FeedbackSourceArg::MeanField => FeedbackSource::MeanField,
        };
        config.gain_choice = overrides.gain_source.unwrap_or(c.gain_source).into();
        config.validate().map_err(|e| match e {
            taskswarm::Error::NonPositiveTarget { index, value } => field(
                format!("target.distribution[{index}]"),
                format!("entry is {value}, must be strictly positive"),
            ),
            taskswarm::Error::InvalidParameter { name, reason } => field(format!("run.{name}"), reason),
            other => field("config", other),
        })?;

        let resolve = |p: &Option<PathBuf>| p.as_ref().map(|p| base_dir.join(p));
        Ok(Scenario {
            config,
            oscillation_window: run.oscillation_window,
            oscillation_tol: run.oscillation_tol,
            per_state_columns: run.per_state_columns,
            trace_path: resolve(&self.output.trace),
            synthesis_path: resolve(&self.output.synthesis),
        })
    }
}

impl GraphSection {
    /// Section written by the `grid` command.
    pub fn from_grid(graph: TaskGraph, kernel: StochasticMatrix) -> Self {
        Self {
            rows: None,
            cols: None,
            adjacency: Some(graph),
            kernel: Some(kernel),
        }
    }

    pub fn to_spec(&self) -> Result<GraphSpec, CliError> {
        match (self.rows, self.cols, &self.adjacency, &self.kernel) {
            (Some(rows), Some(cols), None, None) => {
                let (rows, cols) = grid_dims(rows, cols)?;
                Ok(GraphSpec::Grid { rows, cols })
            }
            (None, None, Some(g), None) => Ok(GraphSpec::Adjacency(g.clone())),
            (None, None, Some(g), Some(k)) => {
                if k.dim() != g.num_tasks() {
                    return Err(field(
                        "graph.kernel",
                        format!("has {} rows but the adjacency has {} tasks", k.dim(), g.num_tasks()),
                    ));
                }
                let reference = normalize_adjacency(g);
                if !check_sparsity_match(k, &reference) {
                    return Err(field("graph.kernel", "support differs from graph.adjacency"));
                }
                Ok(GraphSpec::Kernel(k.clone()))
            }
            (None, None, None, Some(k)) => Ok(GraphSpec::Kernel(k.clone())),
            (Some(_), None, _, _) | (None, Some(_), _, _) => {
                Err(field("graph", "`rows` and `cols` must be given together"))
            }
            (None, None, None, None) => Err(field("graph", "expected `rows`/`cols`, `adjacency` or `kernel`")),
            _ => Err(field("graph", "`rows`/`cols` cannot be combined with `adjacency` or `kernel`")),
        }
    }
}

/// Validates grid dimensions for dense storage.
pub fn grid_dims(rows: usize, cols: usize) -> Result<(NonZeroUsize, NonZeroUsize), CliError> {
    let r = NonZeroUsize::new(rows).ok_or_else(|| field("rows", "must be at least 1"))?;
    let c = NonZeroUsize::new(cols).ok_or_else(|| field("cols", "must be at least 1"))?;
    match rows.checked_mul(cols) {
        Some(m) if m <= MAX_TASKS => Ok((r, c)),
        _ => Err(field("rows*cols", format!("grid exceeds {MAX_TASKS} tasks"))),
    }
}

impl InitialSection {
    fn to_state(&self, m: usize) -> Result<InitialState, CliError> {
        match (self.task, &self.distribution, &self.counts) {
            (None, None, None) => Ok(InitialState::OneHot(0)),
            (Some(t), None, None) => {
                if t >= m {
                    return Err(field("initial.task", format!("task {t} out of range for {m} tasks")));
                }
                Ok(InitialState::OneHot(t))
            }
            (None, Some(d), None) => {
                check_len("initial.distribution", d.len(), m)?;
                ProbabilityVector::new(d.clone())
                    .map(InitialState::Distribution)
                    .map_err(|e| field("initial.distribution", e))
            }
            (None, None, Some(c)) => {
                check_len("initial.counts", c.len(), m)?;
                let mut total: u64 = 0;
                for &v in c {
                    total = total
                        .checked_add(v)
                        .ok_or_else(|| field("initial.counts", "total overflows"))?;
                }
                if total == 0 {
                    return Err(field("initial.counts", "at least one agent is required"));
                }
                Ok(InitialState::Counts(c.clone()))
            }
            _ => Err(field("initial", "give exactly one of `task`, `distribution`, `counts`")),
        }
    }
}

impl TargetSection {
    fn to_distribution(&self, m: usize) -> Result<ProbabilityVector, CliError> {
        match (&self.distribution, self.uniform) {
            (Some(_), Some(true)) => Err(field("target", "`uniform` and `distribution` are exclusive")),
            (Some(d), _) => {
                check_len("target.distribution", d.len(), m)?;
                if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                    return Err(field(
                        format!("target.distribution[{i}]"),
                        format!("entry is {v}, must be strictly positive"),
                    ));
                }
                ProbabilityVector::target(d.clone()).map_err(|e| field("target.distribution", e))
            }
            (None, Some(false)) => Err(field("target", "`distribution` is required when `uniform = false`")),
            (None, _) => Ok(ProbabilityVector::uniform(m)),
        }
    }
}

fn check_len(name: &str, len: usize, m: usize) -> Result<(), CliError> {
    if len == m {
        Ok(())
    } else {
        Err(field(name, format!("has {len} entries, graph has {m} tasks")))
    }
}
