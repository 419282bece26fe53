//! The planning round as a potential game.
//!
//! Each vehicle's cost is its tracking epigraph value `q_i`, which depends on
//! its own decisions only, so the sum of costs is an exact potential. Players
//! share the pairwise rule constraints: a best response of vehicle `i` must
//! keep every neighbor's stored plan feasible, which the compiler expresses by
//! appending the neighbors' pair blocks about `i` (see
//! [`compile_shared_problem`]).

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic_compiler::{
    compile_shared_problem, compile_vehicle_milp, CompileError, CompiledPlanProblem, Scene,
};
use crate::milp_core::{MilpSolver, SolveError};
use crate::mld_model::{compute_neighborhoods, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayerOrder {
    /// Players `0, 1, ..., N-1`, repeated.
    #[default]
    Cyclic,
    /// A fresh seeded permutation for every pass.
    RandomPermutation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Minimum improvement for a move to be accepted.
    pub eps: f64,
    pub order: PlayerOrder,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            eps: 1e-3,
            order: PlayerOrder::Cyclic,
            seed: 0,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("vehicle {vehicle}: {source}")]
    Solve {
        vehicle: usize,
        #[source]
        source: SolveError,
    },
    #[error("vehicle {vehicle}: no feasible initial plan next to the vehicles placed before it")]
    InfeasibleInitialState { vehicle: usize },
    #[error("vehicle {vehicle}: best response infeasible while checking the equilibrium")]
    InfeasibleBestResponse { vehicle: usize },
    #[error("stored plan of vehicle {vehicle} became infeasible: {reason}")]
    Inconsistent { vehicle: usize, reason: String },
    #[error("no equilibrium after {} iterations", log.records.len())]
    MaxIterations { log: IterationLog },
}

/// Joint decision of all players.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub plans: Vec<Plan>,
    /// Assignment of each vehicle's compiled problem (own and auxiliary
    /// variables) consistent with the stored plans.
    pub assignments: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub neighborhoods: Vec<Vec<usize>>,
}

impl GameState {
    pub fn potential(&self) -> f64 {
        self.costs.iter().sum()
    }

    fn plan_slots(&self) -> Vec<Option<Plan>> {
        self.plans.iter().cloned().map(Some).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub player: usize,
    pub improved: bool,
    /// The best response was infeasible; the previous plan was kept.
    pub infeasible: bool,
    pub j_before: f64,
    pub j_after: f64,
    pub potential_after: f64,
    pub nodes: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn accepted(&self) -> usize {
        self.records.iter().filter(|r| r.improved).count()
    }

    pub const CSV_HEADER: &'static str =
        "k,player,improved,infeasible,j_before,j_after,potential_after,nodes,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.player,
                r.improved as u8,
                r.infeasible as u8,
                r.j_before,
                r.j_after,
                r.potential_after,
                r.nodes,
                r.wall_ms
            ));
        }
        out
    }
}

impl fmt::Display for IterationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub plan: Plan,
    pub cost: f64,
    /// Assignment of the vehicle's compiled problem.
    pub assignment: Vec<f64>,
    pub nodes: usize,
}

/// Result of an ε-equilibrium check.
#[derive(Debug, Clone, PartialEq)]
pub struct MineCertificate {
    pub holds: bool,
    /// `J_i(x_i) - J_i(best response)` per player.
    pub slack: Vec<f64>,
}

/// One planning round: the scene, its neighborhoods and the solver.
pub struct Game<'a> {
    pub scene: Scene<'a>,
    pub neighborhoods: Vec<Vec<usize>>,
    pub solver: &'a dyn MilpSolver,
}

impl<'a> Game<'a> {
    /// Neighborhoods from the current positions.
    pub fn new(scene: Scene<'a>, solver: &'a dyn MilpSolver) -> Self {
        let positions: Vec<f64> = scene.states.iter().map(|s| s.pos).collect();
        let neighborhoods = compute_neighborhoods(&positions, scene.world.d_bar);
        Game {
            scene,
            neighborhoods,
            solver,
        }
    }

    pub fn players(&self) -> usize {
        self.scene.states.len()
    }

    fn solve(&self, problem: &CompiledPlanProblem) -> Result<Option<(Vec<f64>, usize)>, GameError> {
        let res = self
            .solver
            .solve(&problem.instance)
            .map_err(|source| GameError::Solve {
                vehicle: problem.vehicle,
                source,
            })?;
        Ok(res.is_optimal().then_some((res.x, res.nodes)))
    }

    /// Best response of `i` against the neighbors' plans in `plans`, restricted
    /// to `neighbors` (the full neighborhood unless building the initial state).
    fn best_response_among(
        &self,
        i: usize,
        neighbors: &[usize],
        plans: &[Option<Plan>],
    ) -> Result<Option<BestResponse>, GameError> {
        let problem = compile_shared_problem(&self.scene, i, neighbors, plans)?;
        let Some((x, nodes)) = self.solve(&problem)? else {
            return Ok(None);
        };
        Ok(Some(BestResponse {
            plan: problem.plan_from(&x),
            cost: problem.cost(&x),
            assignment: x[..problem.num_problem_vars()].to_vec(),
            nodes,
        }))
    }

    /// Mixed-integer best response of `i` given the other players' plans.
    /// `Ok(None)` signals an infeasible problem.
    pub fn best_response(
        &self,
        i: usize,
        plans: &[Option<Plan>],
    ) -> Result<Option<BestResponse>, GameError> {
        self.best_response_among(i, &self.neighborhoods[i], plans)
    }

    /// Cost and consistent auxiliary assignment of `plan` for vehicle `i`
    /// in its own compiled problem; `None` when the plan is infeasible there.
    pub fn evaluate_plan(
        &self,
        i: usize,
        plan: &Plan,
        plans: &[Option<Plan>],
    ) -> Result<Option<(f64, Vec<f64>)>, GameError> {
        self.evaluate_among(i, &self.neighborhoods[i], plan, plans, false)
    }

    fn evaluate_among(
        &self,
        i: usize,
        neighbors: &[usize],
        plan: &Plan,
        plans: &[Option<Plan>],
        shared: bool,
    ) -> Result<Option<(f64, Vec<f64>)>, GameError> {
        let mut problem = if shared {
            compile_shared_problem(&self.scene, i, neighbors, plans)?
        } else {
            compile_vehicle_milp(&self.scene, i, neighbors, plans)?
        };
        problem.fix_plan(plan);
        Ok(self
            .solve(&problem)?
            .map(|(x, _)| (problem.cost(&x), x[..problem.num_problem_vars()].to_vec())))
    }

    /// Builds a feasible starting point: vehicles are placed one at a time,
    /// each keeping lane and speed when that is compatible with the vehicles
    /// already placed and otherwise taking its best response against them.
    pub fn initial_state(&self) -> Result<GameState, GameError> {
        let n = self.players();
        let horizon = self.scene.world.horizon;
        let mut slots: Vec<Option<Plan>> = vec![None; n];
        for i in 0..n {
            let placed: Vec<usize> = self.neighborhoods[i]
                .iter()
                .copied()
                .filter(|&j| slots[j].is_some())
                .collect();
            let hold = Plan::hold(&self.scene.states[i], horizon);
            let plan = if self
                .evaluate_among(i, &placed, &hold, &slots, true)?
                .is_some()
            {
                hold
            } else {
                match self.best_response_among(i, &placed, &slots)? {
                    Some(br) => br.plan,
                    None => return Err(GameError::InfeasibleInitialState { vehicle: i }),
                }
            };
            slots[i] = Some(plan);
        }
        let plans: Vec<Plan> = slots
            .iter()
            .map(|p| p.clone().expect("every vehicle placed"))
            .collect();
        let mut state = GameState {
            plans,
            assignments: Vec::with_capacity(n),
            costs: Vec::with_capacity(n),
            neighborhoods: self.neighborhoods.clone(),
        };
        for i in 0..n {
            let (cost, x) = self.refresh(i, &state, &slots)?;
            state.costs.push(cost);
            state.assignments.push(x);
        }
        Ok(state)
    }

    /// Adopts `plans` as the starting point when every plan is feasible for
    /// its vehicle's compiled problem; `None` otherwise.
    pub fn warm_state(&self, plans: &[Plan]) -> Result<Option<GameState>, GameError> {
        let n = self.players();
        if plans.len() != n {
            return Ok(None);
        }
        let slots: Vec<Option<Plan>> = plans.iter().cloned().map(Some).collect();
        let mut state = GameState {
            plans: plans.to_vec(),
            assignments: Vec::with_capacity(n),
            costs: Vec::with_capacity(n),
            neighborhoods: self.neighborhoods.clone(),
        };
        for i in 0..n {
            match self.evaluate_plan(i, &plans[i], &slots)? {
                Some((cost, x)) => {
                    state.costs.push(cost);
                    state.assignments.push(x);
                }
                None => return Ok(None),
            }
        }
        Ok(Some(state))
    }

    fn refresh(
        &self,
        i: usize,
        state: &GameState,
        slots: &[Option<Plan>],
    ) -> Result<(f64, Vec<f64>), GameError> {
        self.evaluate_plan(i, &state.plans[i], slots)?
            .ok_or_else(|| GameError::Inconsistent {
                vehicle: i,
                reason: "plan infeasible for its compiled problem".into(),
            })
    }

    /// Checks the ε-equilibrium condition by recomputing every best response
    /// from scratch. Players are evaluated in parallel on the frozen state.
    pub fn check_eps_mine(
        &self,
        state: &GameState,
        eps: f64,
    ) -> Result<MineCertificate, GameError> {
        let slots = state.plan_slots();
        let n = self.players();
        let results: Vec<Result<Option<BestResponse>, GameError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .map(|i| {
                    let slots = &slots;
                    s.spawn(move || self.best_response(i, slots))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("best-response worker panicked"))
                .collect()
        });
        let mut slack = Vec::with_capacity(n);
        for (i, r) in results.into_iter().enumerate() {
            let br = r?.ok_or(GameError::InfeasibleBestResponse { vehicle: i })?;
            let own = state.plans[i].tracking_cost(&self.scene.params[i]);
            slack.push(own - br.cost);
        }
        Ok(MineCertificate {
            holds: slack.iter().all(|&s| s <= eps),
            slack,
        })
    }

    /// Gauss-Southwell iteration: one player at a time computes its best
    /// response and moves if that improves its cost by at least `eps`. Stops
    /// once every player has declined to move since the last accepted move.
    pub fn gauss_southwell(
        &self,
        initial: GameState,
        config: &GameConfig,
    ) -> Result<(GameState, IterationLog), GameError> {
        let n = self.players();
        let mut state = initial;
        let mut log = IterationLog::default();
        if n == 0 {
            return Ok((state, log));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut pass: Vec<usize> = Vec::new();
        let mut idle: BTreeSet<usize> = BTreeSet::new();
        // A declined response stays valid until the player or a neighbor moves.
        let mut version = 0usize;
        let mut moved_at = vec![0usize; n];
        let mut declined: Vec<Option<(usize, Option<BestResponse>)>> = vec![None; n];
        let mut k = 0;
        while idle.len() < n {
            if k >= config.max_iterations {
                return Err(GameError::MaxIterations { log });
            }
            if pass.is_empty() {
                pass = (0..n).rev().collect();
                if config.order == PlayerOrder::RandomPermutation {
                    pass.shuffle(&mut rng);
                }
            }
            let i = pass.pop().expect("pass refilled above");
            let start = Instant::now();
            let cached = declined[i].take().filter(|(seen, _)| {
                moved_at[i] <= *seen && self.neighborhoods[i].iter().all(|&j| moved_at[j] <= *seen)
            });
            let br = match cached {
                Some((_, br)) => br,
                None => self.best_response(i, &state.plan_slots())?,
            };
            let j_before = state.costs[i];
            let mut record = IterationRecord {
                k,
                player: i,
                improved: false,
                infeasible: br.is_none(),
                j_before,
                j_after: j_before,
                potential_after: 0.0,
                nodes: br.as_ref().map_or(0, |b| b.nodes),
                wall_ms: 0.0,
            };
            match br {
                Some(br) if j_before - br.cost >= config.eps => {
                    state.plans[i] = br.plan;
                    state.costs[i] = br.cost;
                    state.assignments[i] = br.assignment;
                    let slots = state.plan_slots();
                    for &j in &self.neighborhoods[i] {
                        let (_, x) = self.refresh(j, &state, &slots)?;
                        state.assignments[j] = x;
                    }
                    record.improved = true;
                    record.j_after = br.cost;
                    idle.clear();
                    version += 1;
                    moved_at[i] = version;
                }
                br => {
                    declined[i] = Some((version, br));
                    idle.insert(i);
                }
            }
            record.potential_after = state.potential();
            record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            log.records.push(record);
            k += 1;
        }
        Ok((state, log))
    }

    /// Initial state followed by Gauss-Southwell.
    pub fn solve_round(&self, config: &GameConfig) -> Result<(GameState, IterationLog), GameError> {
        self.solve_round_from(config, None)
    }

    /// Like [`Game::solve_round`], starting from `warm` when it is feasible.
    pub fn solve_round_from(
        &self,
        config: &GameConfig,
        warm: Option<&[Plan]>,
    ) -> Result<(GameState, IterationLog), GameError> {
        let init = match warm {
            Some(plans) => match self.warm_state(plans)? {
                Some(state) => state,
                None => self.initial_state()?,
            },
            None => self.initial_state()?,
        };
        self.gauss_southwell(init, config)
    }
}
