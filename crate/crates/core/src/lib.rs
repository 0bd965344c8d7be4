//! Optimal status updating for an energy-harvesting sensor with a paid
//! reliable energy backup, sending over a randomly blocked channel.
//!
//! The crate models the problem as an average-cost MDP over (AoI, battery)
//! states, solves it by relative value iteration, extracts threshold
//! policies, scores policies exactly and by simulation, and checks the
//! structural properties (monotone values, bounded increments,
//! sub-modular Q) that make threshold policies optimal.

pub mod error;
pub mod evaluator;
pub mod model;
pub mod policies;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use evaluator::{evaluate_exact, evaluate_periodic_exact, simulate, EvalReport, Simulator, StepRecord};
pub use model::{enumerate_states, one_step_cost, transition, Action, ModelParams, State, TransitionDist};
pub use policies::PolicyKind;
pub use solver::{
    extract_policy, extract_thresholds, modified_via, q_value, relative_value_iteration, Policy,
    SolveResult, SolverOptions, ThresholdPolicy, ValueTable,
};
pub use verify::StructureReport;
