//! Scenario loading, receding-horizon simulation, safety monitors and traces.

pub mod monitor;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use monitor::{
    check_consecutive_lane_safety, check_longitudinal_safety, SafetyReport, Violation,
    ViolationKind, SAFETY_TOL,
};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError, SimSettings};
pub use sim::{
    plan_round, simulate, step_world, windowed_params, Replan, RoundResult, SimError, SimOptions,
    SimOutcome,
};
pub use trace::{RoundMeta, Trace, TraceError, TraceRow, GAME_HEADER, TRACE_HEADER};
