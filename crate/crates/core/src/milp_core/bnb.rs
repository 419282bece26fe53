//! Branch-and-bound over the LP relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::presolve::{presolve, propagate, Infeasible, Reduced};
use super::simplex::{Outcome, Simplex};
use super::{Branching, MilpResult, MilpStatus, NodeOrder, SolveError, SolverConfig};
use crate::logic_compiler::MilpInstance;

struct Node {
    lo: Vec<f64>,
    up: Vec<f64>,
    /// Relaxation value of the parent; a lower bound for this node.
    bound: f64,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Max-heap order: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Pool {
    Stack(Vec<Node>),
    Heap(BinaryHeap<Node>),
}

impl Pool {
    fn push(&mut self, node: Node) {
        match self {
            Pool::Stack(s) => s.push(node),
            Pool::Heap(h) => h.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Pool::Stack(s) => s.pop(),
            Pool::Heap(h) => h.pop(),
        }
    }
}

fn fractionality(x: f64) -> f64 {
    (x - x.floor()).min(x.ceil() - x)
}

/// Solves the node LP warm; after numerical trouble, retries once from a
/// fresh slack basis, which the later nodes then inherit.
fn solve_node<'a>(
    lp: &mut Simplex<'a>,
    red: &'a Reduced,
    feas_tol: f64,
    lo: &[f64],
    up: &[f64],
) -> Result<Outcome, SolveError> {
    lp.set_bounds(lo, up);
    if let Ok(outcome) = lp.solve() {
        return Ok(outcome);
    }
    let iterations = lp.iterations;
    *lp = Simplex::new(&red.rows, &red.cost, red.kept.len(), feas_tol);
    lp.iterations = iterations;
    lp.set_bounds(lo, up);
    lp.solve().map_err(|e| SolveError::Numerical(e.0))
}

pub(crate) fn branch_and_bound(
    instance: &MilpInstance,
    config: &SolverConfig,
) -> Result<MilpResult, SolveError> {
    let infeasible = |nodes| MilpResult {
        status: MilpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::INFINITY,
        nodes,
        lp_iterations: 0,
        root_bound: f64::INFINITY,
        incumbent_history: Vec::new(),
    };
    let red = match presolve(instance, false, config.feas_tol, config.int_tol) {
        Ok(r) => r,
        Err(Infeasible) => return Ok(infeasible(0)),
    };
    let n = red.kept.len();
    let active = vec![true; red.rows.rows.len()];
    let mut lp = Simplex::new(&red.rows, &red.cost, n, config.feas_tol);
    let prune_gap = |inc: f64| 1e-9 * (1.0 + inc.abs());

    let mut pool = match config.node_order {
        NodeOrder::DepthFirst => Pool::Stack(Vec::new()),
        NodeOrder::BestBound => Pool::Heap(BinaryHeap::new()),
    };
    let mut seq = 0usize;
    pool.push(Node {
        lo: red.lo.clone(),
        up: red.up.clone(),
        bound: f64::NEG_INFINITY,
        seq,
    });

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut history = Vec::new();
    let mut nodes = 0usize;
    let mut root_bound = f64::NEG_INFINITY;

    while let Some(node) = pool.pop() {
        if let Some((_, inc)) = &incumbent {
            if node.bound >= inc - prune_gap(*inc) {
                continue;
            }
        }
        if nodes >= config.node_limit {
            return Err(SolveError::NodeLimit {
                nodes,
                incumbent: incumbent.map(|(x, obj)| (red.expand(&x), obj + red.obj_const)),
            });
        }
        nodes += 1;
        let Node {
            mut lo,
            mut up,
            bound,
            ..
        } = node;
        if config.propagate_nodes
            && propagate(
                &red.rows,
                &active,
                &red.kinds,
                &mut lo,
                &mut up,
                config.feas_tol,
                config.int_tol,
                5,
            )
            .is_err()
        {
            continue;
        }
        match solve_node(&mut lp, &red, config.feas_tol, &lo, &up)? {
            Outcome::Infeasible => continue,
            Outcome::Unbounded => return Err(SolveError::Unbounded),
            Outcome::Optimal => {}
        }
        let obj = lp.objective();
        if nodes == 1 {
            root_bound = obj + red.obj_const;
        }
        debug_assert!(
            obj >= bound - 1e-6 * (1.0 + obj.abs()),
            "child relaxation {obj} below parent {bound}"
        );
        if let Some((_, inc)) = &incumbent {
            if obj >= inc - prune_gap(*inc) {
                continue;
            }
        }
        let x = lp.primal().to_vec();
        let mut branch: Option<(usize, f64)> = None;
        for j in 0..n {
            if !red.kinds[j].is_integer() {
                continue;
            }
            let f = fractionality(x[j]);
            if f <= config.int_tol {
                continue;
            }
            match config.branching {
                Branching::FirstFractional => {
                    branch = Some((j, f));
                    break;
                }
                Branching::MostFractional => {
                    if branch.is_none_or(|(_, best)| f > best) {
                        branch = Some((j, f));
                    }
                }
            }
        }
        match branch {
            None => {
                // Round the integers exactly and re-solve the continuous rest.
                let (mut plo, mut pup) = (lo.clone(), up.clone());
                for j in 0..n {
                    if red.kinds[j].is_integer() {
                        let v = x[j].round();
                        plo[j] = v;
                        pup[j] = v;
                    }
                }
                if solve_node(&mut lp, &red, config.feas_tol, &plo, &pup)? != Outcome::Optimal {
                    continue;
                }
                let pobj = lp.objective();
                let better = incumbent
                    .as_ref()
                    .is_none_or(|(_, inc)| pobj < inc - prune_gap(*inc));
                if better {
                    let mut px = lp.primal().to_vec();
                    for j in 0..n {
                        if red.kinds[j].is_integer() {
                            px[j] = px[j].round();
                        }
                    }
                    history.push((nodes, pobj + red.obj_const));
                    incumbent = Some((px, pobj));
                }
            }
            Some((j, _)) => {
                let v = x[j];
                let mut down = Node {
                    lo: lo.clone(),
                    up: up.clone(),
                    bound: obj,
                    seq: 0,
                };
                down.up[j] = v.floor();
                let mut upper = Node {
                    lo,
                    up,
                    bound: obj,
                    seq: 0,
                };
                upper.lo[j] = v.ceil();
                // Depth-first explores the nearer rounding first.
                let order = if v - v.floor() <= 0.5 {
                    [upper, down]
                } else {
                    [down, upper]
                };
                for mut child in order {
                    seq += 1;
                    child.seq = seq;
                    pool.push(child);
                }
            }
        }
    }

    let lp_iterations = lp.iterations;
    match incumbent {
        None => Ok(MilpResult {
            lp_iterations,
            ..infeasible(nodes)
        }),
        Some((x, obj)) => {
            let full = red.expand(&x);
            let violation = instance.max_scaled_violation(&full);
            if violation > config.feas_tol {
                return Err(SolveError::Numerical(format!(
                    "incumbent violates the instance by {violation:e}"
                )));
            }
            Ok(MilpResult {
                status: MilpStatus::Optimal,
                objective: obj + red.obj_const,
                x: full,
                nodes,
                lp_iterations,
                root_bound,
                incumbent_history: history,
            })
        }
    }
}
