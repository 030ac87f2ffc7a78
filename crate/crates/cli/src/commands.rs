use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use taskswarm::measure::second_eigenvalue_modulus;
use taskswarm::simulator::Aborted;
use taskswarm::stochastic::{stationary_residual, STATIONARY_MAX_ITER};
use taskswarm::{
    build_moore_grid, check_sparsity_match, detect_oscillation, normalize_adjacency,
    run_scenario, stationary_distribution, synthesize, GainChoice, GainSource,
    SimulationTrace, StochasticMatrix,
};

use crate::config::{grid_dims, ConfigFile, GainSourceArg, GraphSection, Overrides, Scenario};
use crate::CliError;

/// Written by `synthesize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisReport {
    pub gain_source: GainSourceArg,
    /// `‖p^d P* − p^d‖∞`
    pub stationary_residual: f64,
    /// `‖π(P*) − p^d‖∞` with `π` solved independently.
    pub target_error: f64,
    /// Whether `P*` has exactly the support of the base kernel.
    pub sparsity_ok: bool,
    /// `|λ₂(P*)|`, a mixing-speed diagnostic.
    pub second_eigenvalue_modulus: f64,
    /// Normalized gain; absent for a single task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    pub p_star: StochasticMatrix,
}

/// Written by `grid`; the `[graph]` section can be pasted into a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub graph: GraphSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub epochs: u64,
    pub final_error_inf: f64,
    pub final_activity: f64,
    /// `None` when the trace is shorter than two oscillation windows.
    pub oscillating: Option<bool>,
    /// `None` when the trace went to stdout.
    pub trace_path: Option<PathBuf>,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let osc = self.oscillating.map_or("n/a".to_string(), |o| o.to_string());
        write!(
            f,
            "epochs={} final_error_inf={:.6e} final_activity={:.6e} oscillating={osc}",
            self.epochs, self.final_error_inf, self.final_activity
        )
    }
}

fn load_scenario(config_path: &Path, overrides: Overrides) -> Result<Scenario, CliError> {
    let file = ConfigFile::load(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    file.into_scenario(overrides, base_dir).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", config_path.display())),
        other => other,
    })
}

/// Writes `text` to `out`, or stdout when `out` is `None`.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_toml<T: Serialize>(value: &T) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| CliError::Input(format!("cannot encode output: {e}")))
}

pub fn cmd_synthesize(
    config_path: &Path,
    out: Option<&Path>,
    overrides: Overrides,
) -> Result<SynthesisReport, CliError> {
    let scenario = load_scenario(config_path, overrides)?;
    let cfg = &scenario.config;
    let base = cfg.graph.base_kernel();
    let (source, gain_source) = match cfg.gain_choice {
        GainChoice::Stationary => (GainSource::Stationary, GainSourceArg::Stationary),
        GainChoice::Initial => (
            GainSource::Initial(cfg.initial_fractions(base.dim())),
            GainSourceArg::Initial,
        ),
    };
    let synthesis = synthesize(&base, &cfg.target, &source, cfg.stationary_tol)?;
    let p_star = synthesis.kernel;
    let pi = stationary_distribution(&p_star, cfg.stationary_tol, STATIONARY_MAX_ITER)?;
    let report = SynthesisReport {
        gain_source,
        stationary_residual: stationary_residual(&p_star, cfg.target.values()),
        target_error: pi.max_abs_diff(&cfg.target),
        sparsity_ok: check_sparsity_match(&p_star, &base),
        second_eigenvalue_modulus: second_eigenvalue_modulus(&p_star),
        gain: synthesis.gain.map(|g| g.values().to_vec()),
        p_star,
    };
    let out = out.map(Path::to_path_buf).or(scenario.synthesis_path);
    emit(out.as_deref(), &to_toml(&report)?)?;
    Ok(report)
}

fn encode(e: impl std::fmt::Display, at: &Path) -> CliError {
    CliError::Input(format!("{}: {e}", at.display()))
}

fn write_trace(trace: &SimulationTrace, path: Option<&Path>, per_state: bool) -> Result<(), CliError> {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut writer = BufWriter::new(file);
            trace.write_csv(&mut writer, per_state).map_err(|e| encode(e, path))?;
            writer.flush().map_err(|e| CliError::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            trace
                .write_csv(&mut lock, per_state)
                .map_err(|e| encode(e, Path::new("<stdout>")))?;
            lock.flush().map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

pub fn cmd_simulate(
    config_path: &Path,
    out: Option<&Path>,
    overrides: Overrides,
) -> Result<RunSummary, CliError> {
    let scenario = load_scenario(config_path, overrides)?;
    let out = out.map(Path::to_path_buf).or(scenario.trace_path.clone());
    simulate_scenario(&scenario, out)
}

fn simulate_scenario(scenario: &Scenario, out: Option<PathBuf>) -> Result<RunSummary, CliError> {
    let trace = match run_scenario(&scenario.config) {
        Ok(trace) => trace,
        Err(Aborted { error, partial }) => {
            let mut err = CliError::from(error);
            if let Some(partial) = partial {
                write_trace(&partial, out.as_deref(), scenario.per_state_columns)?;
                if let CliError::Numeric(msg) | CliError::Input(msg) = &mut err {
                    msg.push_str(&format!(
                        " (aborted after {} epochs, partial trace written)",
                        partial.records.len()
                    ));
                }
            }
            return Err(err);
        }
    };
    write_trace(&trace, out.as_deref(), scenario.per_state_columns)?;
    let last = trace.last().expect("validated epochs >= 1");
    let oscillating = detect_oscillation(&trace, scenario.oscillation_window, scenario.oscillation_tol)
        .ok()
        .map(|o| o.oscillating);
    Ok(RunSummary {
        epochs: last.k,
        final_error_inf: last.error_inf,
        final_activity: last.activity,
        oscillating,
        trace_path: out,
    })
}

/// One config file and its outcome.
pub type DirRun = (PathBuf, Result<RunSummary, CliError>);

/// Runs every `*.toml` in `dir` on its own thread. Traces go to
/// `<out_dir>/<stem>.csv`, with `out_dir` defaulting to `dir`.
pub fn cmd_simulate_dir(
    dir: &Path,
    out_dir: Option<&Path>,
    overrides: Overrides,
) -> Result<Vec<DirRun>, CliError> {
    let mut configs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    let out_dir = out_dir.unwrap_or(dir);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let results = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|path| {
                s.spawn(move || {
                    let stem = path.file_stem().unwrap_or_default();
                    let csv = out_dir.join(stem).with_extension("csv");
                    load_scenario(path, overrides).and_then(|sc| simulate_scenario(&sc, Some(csv)))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Numeric("scenario thread panicked".into())))
            })
            .collect::<Vec<_>>()
    });
    Ok(configs.into_iter().zip(results).collect())
}

pub fn cmd_grid(rows: usize, cols: usize, out: Option<&Path>) -> Result<GridFile, CliError> {
    let (r, c) = grid_dims(rows, cols)?;
    let graph = build_moore_grid(r, c);
    let kernel = normalize_adjacency(&graph);
    let file = GridFile {
        graph: GraphSection::from_grid(graph, kernel),
    };
    emit(out, &to_toml(&file)?)?;
    Ok(file)
}
