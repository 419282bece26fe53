//! Compilation of the per-vehicle hybrid MPC problem into a MILP.
//!
//! The logical rules (safety distance, free-space agreement, lateral
//! indicator rule) are expanded through auxiliary binaries and big-M
//! systems; see [`patterns`] for the building blocks and [`compile`] for the
//! assembled problem.

pub mod compile;
pub mod lp_format;
pub mod model;
pub mod patterns;

use thiserror::Error;

pub use compile::{
    compile_shared_problem, compile_vehicle_milp, expected_constraint_count,
    expected_variable_count, CompiledPlanProblem, OwnVars, Scene, AUX_ROWS_PER_STEP,
    AUX_VARS_PER_STEP, OWN_ROWS_PER_STEP, OWN_VARS_PER_STEP,
};
pub use lp_format::{read_lp, write_lp, LpFormatError};
pub use model::{Constraint, LinearExpr, MilpInstance, ModelBuilder, Symbol, VarInfo, VarKind};
pub use patterns::{s_and, s_geq, s_leq, s_or, s_product, BinArg};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("expression is unbounded over its box: variable `{0}` has an infinite bound")]
    Unbounded(String),
    #[error("`{0}` is not a binary variable")]
    NotBinary(String),
    #[error("vehicle {vehicle}: infeasible initial state: {reason}")]
    InfeasibleInitialState { vehicle: usize, reason: String },
    #[error("vehicle {vehicle}: no plan for neighbor {neighbor}")]
    MissingNeighborPlan { vehicle: usize, neighbor: usize },
    #[error("vehicle {vehicle}: {reason}")]
    BadInput { vehicle: usize, reason: String },
    #[error("malformed instance: {0}")]
    Malformed(String),
}
