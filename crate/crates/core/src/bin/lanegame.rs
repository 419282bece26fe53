//! Command-line front end: run scenarios, solve single rounds, check traces.
//!
//! Exit codes: 0 safe and converged, 1 usage or I/O error, 2 safety
//! violation, 3 no equilibrium reached.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lanegame_core::game::IterationLog;
use lanegame_core::harness::{
    check_consecutive_lane_safety, check_longitudinal_safety, load_scenario, plan_round, simulate,
    Replan, RoundResult, SafetyReport, Scenario, SimError, SimOptions, Trace,
};
use lanegame_core::logic_compiler::{compile_shared_problem, write_lp, Scene};
use lanegame_core::milp_core::BranchAndBound;
use lanegame_core::mld_model::RuleSet;

const EXIT_ERROR: u8 = 1;
const EXIT_UNSAFE: u8 = 2;
const EXIT_NO_EQUILIBRIUM: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lanegame",
    version,
    about = "Lane-change planning as a mixed-integer potential game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rule {
    FreeSpace,
    Lateral,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplanArg {
    EveryStep,
    PerWindow,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the trace, round metadata and iteration log.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Leave a logic rule out of the compiled problems (repeatable).
        #[arg(long = "disable-rule", value_enum)]
        disable_rule: Vec<Rule>,
        #[arg(long, value_enum, default_value = "every-step")]
        replan: ReplanArg,
        /// Override the scenario's step count.
        #[arg(long)]
        steps: Option<usize>,
        /// Skip the per-round equilibrium recomputation.
        #[arg(long)]
        no_certify: bool,
    },
    /// Plan one round and print the equilibrium plans.
    SolveOnce {
        scenario: PathBuf,
        /// Round to plan; earlier rounds are simulated first.
        #[arg(long, default_value_t = 0)]
        round: usize,
        /// Write each vehicle's best-response problem at the equilibrium as an LP file.
        #[arg(long)]
        dump_milp: bool,
        /// Directory for dumped problems.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run both safety monitors on a trace file.
    Check {
        trace: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            disable_rule,
            replan,
            steps,
            no_certify,
        } => {
            let replan = match replan {
                ReplanArg::EveryStep => Replan::EveryStep,
                ReplanArg::PerWindow => Replan::PerWindow,
            };
            run_simulate(&scenario, &out, &disable_rule, replan, steps, !no_certify)
        }
        Command::SolveOnce {
            scenario,
            round,
            dump_milp,
            out,
        } => run_solve_once(&scenario, round, dump_milp, &out),
        Command::Check { trace, scenario } => run_check(&trace, &scenario),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, String> {
    load_scenario(path).map_err(|e| e.to_string())
}

fn rules_without(base: RuleSet, disabled: &[Rule]) -> RuleSet {
    let mut rules = base;
    for r in disabled {
        match r {
            Rule::FreeSpace => rules.free_space = false,
            Rule::Lateral => rules.lateral = false,
        }
    }
    rules
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn round_log_csv(rounds: &[RoundResult]) -> String {
    let mut out = format!("round,{}\n", IterationLog::CSV_HEADER);
    for (r, round) in rounds.iter().enumerate() {
        for line in round.log.to_csv().lines().skip(1) {
            out.push_str(&format!("{r},{line}\n"));
        }
    }
    out
}

fn report(name: &str, rep: &SafetyReport) -> bool {
    match rep.first() {
        None => {
            println!("{name}: safe");
            true
        }
        Some(v) => {
            println!("{name}: {} violation(s), first: {v}", rep.violations.len());
            false
        }
    }
}

fn verdict(trace: &Trace, scenario: &Scenario) -> u8 {
    let lon = check_longitudinal_safety(trace, &scenario.params);
    let lat = check_consecutive_lane_safety(trace, scenario.world.d_hat);
    let ok_lon = report("longitudinal", &lon);
    let ok_lat = report("consecutive lanes", &lat);
    if lon.min_margin.is_finite() {
        println!("smallest same-lane margin: {:.6}", lon.min_margin);
    }
    if ok_lon && ok_lat {
        0
    } else {
        EXIT_UNSAFE
    }
}

fn run_simulate(
    path: &Path,
    out: &Path,
    disabled: &[Rule],
    replan: Replan,
    steps: Option<usize>,
    certify: bool,
) -> Result<u8, String> {
    let scenario = load(path)?;
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let options = SimOptions {
        replan,
        rules: Some(rules_without(scenario.world.rules, disabled)),
        certify,
        steps,
        ..SimOptions::default()
    };
    let trace_path = out.join(format!("{}.csv", stem(path)));
    let solver = BranchAndBound::default();
    match simulate(&scenario, &options, &solver) {
        Ok(outcome) => {
            let game = outcome
                .trace
                .write(&trace_path)
                .map_err(|e| e.to_string())?;
            let log_path = out.join(format!("{}.log.csv", stem(path)));
            fs::write(&log_path, round_log_csv(&outcome.rounds))
                .map_err(|e| format!("cannot write {}: {e}", log_path.display()))?;
            let total: usize = outcome.rounds.iter().map(|r| r.log.iterations()).sum();
            println!(
                "{} rounds, {} best-response iterations; wrote {}, {}, {}",
                outcome.rounds.len(),
                total,
                trace_path.display(),
                game.display(),
                log_path.display()
            );
            Ok(verdict(&outcome.trace, &scenario))
        }
        Err(err) => {
            let partial = match &err {
                SimError::Game { partial, .. } | SimError::NotEquilibrium { partial, .. } => {
                    partial
                }
            };
            partial.write(&trace_path).map_err(|e| e.to_string())?;
            eprintln!(
                "simulation stopped: {err}; partial trace in {}",
                trace_path.display()
            );
            Ok(if err.is_non_convergence() {
                EXIT_NO_EQUILIBRIUM
            } else {
                EXIT_ERROR
            })
        }
    }
}

fn run_solve_once(path: &Path, round: usize, dump: bool, out: &Path) -> Result<u8, String> {
    let scenario = load(path)?;
    let solver = BranchAndBound::default();
    let states = if round == 0 {
        scenario.initial.clone()
    } else {
        let options = SimOptions {
            certify: false,
            steps: Some(round),
            ..SimOptions::default()
        };
        let outcome = simulate(&scenario, &options, &solver).map_err(|e| e.to_string())?;
        outcome
            .trace
            .states
            .last()
            .cloned()
            .expect("trace holds the initial state")
    };
    let config = lanegame_core::game::GameConfig {
        eps: scenario.world.eps_game,
        order: scenario.sim.player_order,
        seed: scenario.sim.seed.wrapping_add(round as u64),
        ..Default::default()
    };
    let result = match plan_round(
        &scenario.world,
        &scenario.params,
        &states,
        round,
        &config,
        &solver,
        true,
        None,
    ) {
        Ok(r) => r,
        Err(e @ lanegame_core::game::GameError::MaxIterations { .. }) => {
            eprintln!("{e}");
            return Ok(EXIT_NO_EQUILIBRIUM);
        }
        Err(e) => return Err(e.to_string()),
    };
    println!(
        "round {round}: {} iterations, {} accepted, potential {:.6}, {:.1} ms",
        result.log.iterations(),
        result.log.accepted(),
        result.state.potential(),
        result.wall_ms
    );
    for (i, plan) in result.state.plans.iter().enumerate() {
        println!(
            "vehicle {}: cost {:.6} v {:?} z {:?} left {:?} right {:?}",
            scenario.params[i].id,
            result.state.costs[i],
            plan.v
                .iter()
                .map(|v| (v * 1e6).round() / 1e6)
                .collect::<Vec<_>>(),
            plan.z,
            plan.a_l.iter().map(|&b| b as u8).collect::<Vec<_>>(),
            plan.a_r.iter().map(|&b| b as u8).collect::<Vec<_>>()
        );
    }
    print!("{}", result.log);
    if dump {
        fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
        let windowed = lanegame_core::harness::windowed_params(
            &scenario.params,
            round,
            scenario.world.horizon,
        );
        let scene = Scene {
            world: &scenario.world,
            params: &windowed,
            states: &states,
        };
        let slots: Vec<_> = result.state.plans.iter().cloned().map(Some).collect();
        for i in 0..states.len() {
            let problem = compile_shared_problem(&scene, i, &result.state.neighborhoods[i], &slots)
                .map_err(|e| e.to_string())?;
            let file = out.join(format!("round{round}_vehicle{}.lp", scenario.params[i].id));
            fs::write(&file, write_lp(&problem.instance))
                .map_err(|e| format!("cannot write {}: {e}", file.display()))?;
            println!("wrote {}", file.display());
        }
    }
    let holds = result.certificate.as_ref().is_none_or(|c| c.holds);
    Ok(if holds { 0 } else { EXIT_NO_EQUILIBRIUM })
}

fn run_check(trace_path: &Path, scenario_path: &Path) -> Result<u8, String> {
    let scenario = load(scenario_path)?;
    let trace = Trace::read(trace_path).map_err(|e| e.to_string())?;
    if trace.vehicles != scenario.vehicle_ids() {
        return Err(format!(
            "trace vehicles {:?} do not match scenario vehicles {:?}",
            trace.vehicles,
            scenario.vehicle_ids()
        ));
    }
    Ok(verdict(&trace, &scenario))
}
