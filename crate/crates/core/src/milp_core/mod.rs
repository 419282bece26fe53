//! Exact LP/MILP solving for the small instances the compiler emits.
//!
//! [`solve_lp`] solves the continuous relaxation; [`solve_milp`] runs
//! branch-and-bound on top of it. Both are deterministic for a given instance
//! and configuration. [`MilpSolver`] is the seam for plugging in an external
//! engine.

mod bnb;
mod presolve;
mod simplex;

use thiserror::Error;

pub use crate::logic_compiler::{read_lp, write_lp, LpFormatError, MilpInstance};

use presolve::{presolve, Infeasible};
use simplex::{Outcome, Simplex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    #[default]
    MostFractional,
    FirstFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeOrder {
    #[default]
    DepthFirst,
    BestBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: usize,
    pub branching: Branching,
    pub node_order: NodeOrder,
    /// Bound propagation at every node before the LP.
    pub propagate_nodes: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feas_tol: 1e-7,
            int_tol: 1e-6,
            node_limit: 200_000,
            branching: Branching::default(),
            node_order: NodeOrder::default(),
            propagate_nodes: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.feas_tol > 0.0 && self.int_tol > 0.0 && self.int_tol < 0.5) {
            return Err(SolveError::InvalidConfig(
                "tolerances must be positive and int_tol below 0.5".into(),
            ));
        }
        if self.node_limit == 0 {
            return Err(SolveError::InvalidConfig(
                "node limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Primal values on optimality, empty otherwise.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Relaxation value at the root (after presolve).
    pub root_bound: f64,
    /// `(node, objective)` each time the incumbent improved.
    pub incumbent_history: Vec<(usize, f64)>,
}

impl MilpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("node limit reached after {nodes} nodes")]
    NodeLimit {
        nodes: usize,
        /// Best assignment found so far and its objective.
        incumbent: Option<(Vec<f64>, f64)>,
    },
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed instance: {0}")]
    Malformed(String),
}

fn check_instance(instance: &MilpInstance) -> Result<(), SolveError> {
    instance
        .validate()
        .map_err(|e| SolveError::Malformed(e.to_string()))?;
    let finite = |x: f64| x.is_finite();
    let rows_ok = instance
        .constraints
        .iter()
        .all(|c| finite(c.rhs) && c.lhs.terms().all(|(_, a)| finite(a)));
    if !rows_ok || !instance.objective.terms().all(|(_, a)| finite(a)) {
        return Err(SolveError::Malformed("non-finite coefficient".into()));
    }
    Ok(())
}

/// Solves the continuous relaxation of `instance`.
pub fn solve_lp(instance: &MilpInstance, config: &SolverConfig) -> Result<LpResult, SolveError> {
    config.validate()?;
    check_instance(instance)?;
    let infeasible = LpResult {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::INFINITY,
        iterations: 0,
    };
    let red = match presolve(instance, true, config.feas_tol, config.int_tol) {
        Ok(r) => r,
        Err(Infeasible) => return Ok(infeasible),
    };
    let mut lp = Simplex::new(&red.rows, &red.cost, red.kept.len(), config.feas_tol);
    lp.set_bounds(&red.lo, &red.up);
    let outcome = lp.solve().map_err(|e| SolveError::Numerical(e.0))?;
    let iterations = lp.iterations;
    Ok(match outcome {
        Outcome::Optimal => LpResult {
            status: LpStatus::Optimal,
            objective: lp.objective() + red.obj_const,
            x: red.expand(lp.primal()),
            iterations,
        },
        Outcome::Infeasible => LpResult {
            iterations,
            ..infeasible
        },
        Outcome::Unbounded => LpResult {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations,
        },
    })
}

/// Solves `instance` to proven optimality (up to the configured tolerances).
pub fn solve_milp(
    instance: &MilpInstance,
    config: &SolverConfig,
) -> Result<MilpResult, SolveError> {
    config.validate()?;
    check_instance(instance)?;
    bnb::branch_and_bound(instance, config)
}

/// A MILP engine usable as the best-response oracle.
pub trait MilpSolver: Send + Sync {
    fn solve(&self, instance: &MilpInstance) -> Result<MilpResult, SolveError>;
}

/// The built-in branch-and-bound engine.
#[derive(Debug, Clone, Default)]
pub struct BranchAndBound {
    pub config: SolverConfig,
}

impl MilpSolver for BranchAndBound {
    fn solve(&self, instance: &MilpInstance) -> Result<MilpResult, SolveError> {
        solve_milp(instance, &self.config)
    }
}
