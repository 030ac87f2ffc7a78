//! Distribution control for homogeneous swarms working on a graph of
//! parallel tasks.
//!
//! * [`central`] synthesizes a broadcast Markov kernel whose stationary
//!   distribution is a prescribed swarm allocation.
//! * [`measure`] perturbs that kernel each epoch with local feedback computed
//!   from a discounted language measure of the allocation error, so that only
//!   a fraction `λ` of the broadcast activity remains at steady state.
//! * [`simulator`] propagates the swarm (mean-field or finite agents) and
//!   records convergence, activity and Lyapunov diagnostics.

pub mod central;
pub mod error;
pub mod graph;
pub mod measure;
pub mod simulator;
pub mod stochastic;

pub use central::{
    apply_gain, gain_from_distributions, synthesize, synthesize_central, CentralSynthesis,
    DiagonalGain, GainSource,
};
pub use error::{Error, Result};
pub use graph::{build_moore_grid, is_irreducible, normalize_adjacency, TaskGraph};
pub use measure::{
    beta_at, cesaro_measure, feedback_kernel, feedback_step, measure_direct, measure_iterative,
    sigmoid_activity, BetaSchedule, CharacteristicVector, FeedbackParams, FeedbackStep,
    MeasureVector,
};
pub use simulator::{
    activity_level, detect_oscillation, lyapunov_diagnostics, run_scenario, step_agents,
    step_meanfield, Controller, FeedbackSource, GainChoice, GraphSpec, InitialState, Mode,
    ScenarioConfig, SimulationTrace,
};
pub use stochastic::{
    check_sparsity_match, stationary_distribution, ProbabilityVector, StochasticMatrix,
    SwarmState,
};
