//! Receding-horizon simulation: plan a round, apply it, repeat.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::Scenario;
use super::trace::{RoundMeta, Trace};
use crate::game::{Game, GameConfig, GameError, GameState, IterationLog, MineCertificate};
use crate::logic_compiler::Scene;
use crate::milp_core::MilpSolver;
use crate::mld_model::{Plan, RuleSet, VehicleParams, VehicleState, WorldParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replan {
    /// Apply the first planned step, then plan again.
    #[default]
    EveryStep,
    /// Apply the whole horizon before planning again.
    PerWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub replan: Replan,
    /// Overrides the scenario's rule set.
    pub rules: Option<RuleSet>,
    /// Recompute the ε-equilibrium certificate after every round.
    pub certify: bool,
    pub max_iterations: usize,
    /// Overrides the scenario's step count.
    pub steps: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            replan: Replan::EveryStep,
            rules: None,
            certify: true,
            max_iterations: 1000,
            steps: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("round {round}: {source}")]
    Game {
        round: usize,
        #[source]
        source: GameError,
        /// Trace up to the failing round.
        partial: Box<Trace>,
    },
    #[error("round {round}: equilibrium check failed, slack {slack:?}")]
    NotEquilibrium {
        round: usize,
        slack: Vec<f64>,
        partial: Box<Trace>,
    },
}

impl SimError {
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            SimError::Game {
                source: GameError::MaxIterations { .. },
                ..
            }
        ) || matches!(self, SimError::NotEquilibrium { .. })
    }
}

/// Outcome of one planning round.
#[derive(Debug, Clone)]
pub struct RoundResult {
    /// Simulation step the round starts from.
    pub step: usize,
    pub state: GameState,
    pub log: IterationLog,
    pub certificate: Option<MineCertificate>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: Trace,
    pub rounds: Vec<RoundResult>,
}

/// Parameters with references windowed to the horizon starting at `step`.
pub fn windowed_params(
    params: &[VehicleParams],
    step: usize,
    horizon: usize,
) -> Vec<VehicleParams> {
    params.iter().map(|p| p.window(step, horizon)).collect()
}

/// Builds the game at the current states and runs it to an equilibrium,
/// starting from `warm` plans when they are still feasible.
#[allow(clippy::too_many_arguments)]
pub fn plan_round(
    world: &WorldParams,
    params: &[VehicleParams],
    states: &[VehicleState],
    step: usize,
    config: &GameConfig,
    solver: &dyn MilpSolver,
    certify: bool,
    warm: Option<&[Plan]>,
) -> Result<RoundResult, GameError> {
    let start = Instant::now();
    let windowed = windowed_params(params, step, world.horizon);
    let scene = Scene {
        world,
        params: &windowed,
        states,
    };
    let game = Game::new(scene, solver);
    let (state, log) = game.solve_round_from(config, warm)?;
    let certificate = if certify {
        Some(game.check_eps_mine(&state, config.eps)?)
    } else {
        None
    };
    Ok(RoundResult {
        step,
        state,
        log,
        certificate,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Applies step `k` (0-based) of every plan: positions advance by `tau` times
/// the speed at step `k`, then speed, lane and indicators take the planned values.
pub fn step_world(
    states: &[VehicleState],
    plans: &[Plan],
    k: usize,
    tau: f64,
) -> Vec<VehicleState> {
    states
        .iter()
        .zip(plans)
        .map(|(s, p)| VehicleState {
            pos: s.pos + tau * s.v,
            v: p.v[k],
            z: p.z[k],
            a_l: p.a_l[k],
            a_r: p.a_r[k],
        })
        .collect()
}

/// Runs the scenario for its configured number of steps.
pub fn simulate(
    scenario: &Scenario,
    options: &SimOptions,
    solver: &dyn MilpSolver,
) -> Result<SimOutcome, SimError> {
    let mut world = scenario.world.clone();
    if let Some(rules) = options.rules {
        world.rules = rules;
    }
    let config = GameConfig {
        eps: world.eps_game,
        order: scenario.sim.player_order,
        seed: scenario.sim.seed,
        max_iterations: options.max_iterations,
    };
    let steps = options.steps.unwrap_or(scenario.sim.steps);
    let mut trace = Trace::new(world.tau, scenario.vehicle_ids());
    let mut states = scenario.initial.clone();
    trace.states.push(states.clone());
    let mut rounds: Vec<RoundResult> = Vec::new();
    let mut step = 0;
    let mut warm: Option<Vec<Plan>> = None;
    while step < steps {
        let round_config = GameConfig {
            seed: config.seed.wrapping_add(rounds.len() as u64),
            ..config.clone()
        };
        let round = plan_round(
            &world,
            &scenario.params,
            &states,
            step,
            &round_config,
            solver,
            options.certify,
            warm.as_deref(),
        )
        .map_err(|source| SimError::Game {
            round: rounds.len(),
            source,
            partial: Box::new(trace.clone()),
        })?;
        if let Some(cert) = &round.certificate {
            if !cert.holds {
                return Err(SimError::NotEquilibrium {
                    round: rounds.len(),
                    slack: cert.slack.clone(),
                    partial: Box::new(trace.clone()),
                });
            }
        }
        trace.rounds.push(RoundMeta {
            round: rounds.len(),
            iterations: round.log.iterations(),
            potential: round.state.potential(),
            wall_ms: round.wall_ms,
        });
        let apply = match options.replan {
            Replan::EveryStep => 1,
            Replan::PerWindow => world.horizon,
        }
        .min(steps - step);
        for k in 0..apply {
            states = step_world(&states, &round.state.plans, k, world.tau);
            trace.states.push(states.clone());
        }
        step += apply;
        warm = Some(round.state.plans.iter().map(|p| p.shifted(apply)).collect());
        rounds.push(round);
    }
    Ok(SimOutcome { trace, rounds })
}
