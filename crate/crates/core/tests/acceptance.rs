//! End-to-end acceptance checks, one line per criterion.
//!
//! Safety margins, swaps and equilibrium slacks are recomputed here from the
//! raw traces and fresh solves rather than taken from the library's monitors.

mod common;

use std::time::Instant;

use common::{
    compiled_pair_problem_counts, milp_by_enumeration, pair_grid, random_milp, scenario_path,
    two_vehicle_best_response,
};
use lanegame_core::game::{Game, GameConfig, IterationLog};
use lanegame_core::harness::{
    check_consecutive_lane_safety, check_longitudinal_safety, load_scenario, plan_round, simulate,
    windowed_params, Scenario, SimOptions, Trace,
};
use lanegame_core::logic_compiler::{
    compile_shared_problem, s_and, s_geq, s_leq, s_or, s_product, BinArg, LinearExpr, ModelBuilder,
    Scene, Symbol, VarKind,
};
use lanegame_core::milp_core::{solve_milp, BranchAndBound, SolverConfig};
use lanegame_core::mld_model::RuleSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn scenario(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).expect("shipped scenario loads")
}

fn run(
    sc: &Scenario,
    rules: RuleSet,
    certify: bool,
) -> Result<lanegame_core::harness::SimOutcome, String> {
    let options = SimOptions {
        rules: Some(rules),
        certify,
        ..SimOptions::default()
    };
    simulate(sc, &options, &BranchAndBound::default()).map_err(|e| e.to_string())
}

/// Smallest same-lane `|d| - d^s` and the first in-lane order reversal.
fn longitudinal_audit(trace: &Trace, sc: &Scenario) -> (f64, Option<usize>) {
    let mut margin = f64::INFINITY;
    let mut crossing = None;
    for (k, snap) in trace.states.iter().enumerate() {
        for i in 0..snap.len() {
            for j in 0..snap.len() {
                if i == j || snap[i].z != snap[j].z {
                    continue;
                }
                let d = snap[j].pos - snap[i].pos;
                let p = &sc.params[i];
                margin = margin.min(d.abs() - (p.d0 + p.h * snap[i].v));
                if let Some(next) = trace.states.get(k + 1) {
                    if next[i].z == next[j].z
                        && d * (next[j].pos - next[i].pos) < 0.0
                        && crossing.is_none()
                    {
                        crossing = Some(k);
                    }
                }
            }
        }
    }
    (margin, crossing)
}

/// First step at which two close vehicles on adjacent lanes trade lanes.
fn first_swap(trace: &Trace, d_hat: f64) -> Option<usize> {
    trace.states.windows(2).position(|w| {
        let (a, b) = (&w[0], &w[1]);
        (0..a.len()).any(|i| {
            (0..a.len()).any(|j| {
                i != j
                    && (a[i].z - a[j].z).abs() == 1
                    && (a[j].pos - a[i].pos).abs() <= d_hat
                    && b[i].z == a[j].z
                    && b[j].z == a[i].z
            })
        })
    })
}

fn longitudinal_conflict(logs: &mut Vec<IterationLog>) -> Outcome {
    let sc = scenario("same_lane_follow.toml");
    ensure(
        sc.params.iter().all(|p| p.h == 0.0),
        "scenario must use h = 0",
    )?;
    let off = run(
        &sc,
        RuleSet {
            free_space: false,
            lateral: true,
        },
        false,
    )?;
    let (_, crossing) = longitudinal_audit(&off.trace, &sc);
    let flagged = check_longitudinal_safety(&off.trace, &sc.params);
    ensure(
        crossing.is_some(),
        "without free-space the vehicles never cross",
    )?;
    ensure(!flagged.is_safe(), "monitor missed the unsafe trace")?;
    let on = run(&sc, RuleSet::all(), true)?;
    ensure(on.trace.states.len() == 21, "expected a 20-step run")?;
    let (margin, crossing_on) = longitudinal_audit(&on.trace, &sc);
    ensure(margin >= -1e-6, format!("min(d - d^s) = {margin}"))?;
    ensure(
        crossing_on.is_none(),
        "vehicles crossed with the rules enabled",
    )?;
    ensure(
        check_longitudinal_safety(&on.trace, &sc.params).is_safe(),
        "monitor flags the safe run",
    )?;
    logs.extend(on.rounds.into_iter().map(|r| r.log));
    Ok(format!(
        "disabled: crossing at step {}, {}; enabled: min(d - d^s) = {margin:.4}",
        crossing.unwrap(),
        flagged.first().unwrap()
    ))
}

fn lateral_conflict(logs: &mut Vec<IterationLog>) -> Outcome {
    let sc = scenario("two_lane_swap.toml");
    let d_hat = sc.world.d_hat;
    let (a, b) = (sc.initial[0], sc.initial[1]);
    ensure(
        (a.pos - b.pos).abs() <= d_hat && (a.z - b.z).abs() == 1,
        "scenario is not a close swap",
    )?;
    let on = run(&sc, RuleSet::all(), true)?;
    let lower = if a.z < b.z { 0 } else { 1 };
    let first_lane = on.rounds[0].state.plans[lower].z[0];
    ensure(
        first_lane == sc.initial[lower].z,
        format!("lower vehicle moves to lane {first_lane} at step 1"),
    )?;
    ensure(
        first_swap(&on.trace, d_hat).is_none(),
        "swap with the lateral rule active",
    )?;
    ensure(
        check_consecutive_lane_safety(&on.trace, d_hat).is_safe(),
        "monitor flags the safe run",
    )?;
    let off = run(
        &sc,
        RuleSet {
            free_space: true,
            lateral: false,
        },
        true,
    )?;
    let swap = first_swap(&off.trace, d_hat).ok_or("no swap with the lateral rule disabled")?;
    let rep = check_consecutive_lane_safety(&off.trace, d_hat);
    ensure(!rep.is_safe(), "monitor missed the swap")?;
    logs.extend(on.rounds.into_iter().map(|r| r.log));
    Ok(format!(
        "enabled: vehicle {} holds lane {first_lane}; disabled: swap at step {swap}",
        sc.params[lower].id
    ))
}

fn count_formulas() -> Outcome {
    let mut checked = 0;
    for t in 1..=4 {
        for n in 0..=3 {
            let (vars, rows) = compiled_pair_problem_counts(t, n);
            ensure(
                vars == 1 + t * (21 * n + 4),
                format!("T={t} N={n}: {vars} variables"),
            )?;
            ensure(
                rows == t * (67 * n + 9),
                format!("T={t} N={n}: {rows} constraints"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (T, N) pairs exact"))
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut feasible, mut infeasible) = (0, 0);
    for case in 0..30 {
        let (lp, integer) = random_milp(&mut rng, 1 + case % 12, case % 11, 2 + case % 6);
        let expected = milp_by_enumeration(&lp, &integer);
        let res = solve_milp(&lp.to_instance(&integer), &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        match expected {
            Some(obj) => {
                feasible += 1;
                ensure(
                    res.is_optimal(),
                    format!("case {case}: reported infeasible"),
                )?;
                ensure(
                    (res.objective - obj).abs() <= 1e-6,
                    format!("case {case}: {} vs {obj}", res.objective),
                )?;
            }
            None => {
                infeasible += 1;
                ensure(
                    !res.is_optimal(),
                    format!("case {case}: optimum on an infeasible problem"),
                )?;
            }
        }
    }
    Ok(format!(
        "{feasible} optima and {infeasible} infeasibility verdicts match"
    ))
}

fn pattern_truth_tables() -> Outcome {
    let eps = 0.25;
    let accepts =
        |m: &lanegame_core::logic_compiler::MilpInstance, x: &[f64]| m.max_violation(x) <= 1e-9;
    let mut probes = 0;
    for c in [-1.0, 0.0, 1.0] {
        for leq in [false, true] {
            let mut b = ModelBuilder::new();
            let x = b.add_var("x", VarKind::Continuous, -4.0, 4.0, Symbol::Other);
            let d = b.add_binary("d");
            if leq {
                s_leq(&mut b, d, &LinearExpr::var(x), c, eps, "p").unwrap();
            } else {
                s_geq(&mut b, d, &LinearExpr::var(x), c, eps, "p").unwrap();
            }
            let m = b.finish();
            let mut pts = vec![c, c - eps, c + eps, c - eps / 2.0, c + eps / 2.0];
            pts.extend((0..=16).map(|k| -4.0 + k as f64 * 0.5));
            for xv in pts {
                let (t, f) = if leq {
                    (xv <= c, xv >= c + eps)
                } else {
                    (xv >= c, xv <= c - eps)
                };
                ensure(
                    accepts(&m, &[xv, 1.0]) == t,
                    format!("leq={leq} c={c} x={xv} d=1"),
                )?;
                ensure(
                    accepts(&m, &[xv, 0.0]) == f,
                    format!("leq={leq} c={c} x={xv} d=0"),
                )?;
                probes += 2;
            }
        }
    }
    for or in [false, true] {
        for mask in 0..4u8 {
            for bits in 0..8u8 {
                let (dv, s, g) = (bits & 1, bits >> 1 & 1, bits >> 2 & 1);
                let mut b = ModelBuilder::new();
                let d = b.add_binary("d");
                let sv = b.add_binary("s");
                let gv = b.add_binary("g");
                let sa = if mask & 1 != 0 {
                    BinArg::Const(s == 1)
                } else {
                    BinArg::Var(sv)
                };
                let ga = if mask & 2 != 0 {
                    BinArg::Const(g == 1)
                } else {
                    BinArg::Var(gv)
                };
                if or {
                    s_or(&mut b, d, sa, ga, "p").unwrap();
                } else {
                    s_and(&mut b, d, sa, ga, "p").unwrap();
                }
                let truth = if or {
                    s == 1 || g == 1
                } else {
                    s == 1 && g == 1
                };
                let ok = accepts(&b.finish(), &[dv as f64, s as f64, g as f64]);
                ensure(
                    ok == ((dv == 1) == truth),
                    format!("or={or} mask={mask} bits={bits}"),
                )?;
                probes += 1;
            }
        }
    }
    let mut b = ModelBuilder::new();
    let x = b.add_var("x", VarKind::Continuous, -3.0, 5.0, Symbol::Other);
    let d = b.add_binary("d");
    let g = b.add_var("g", VarKind::Continuous, -3.0, 5.0, Symbol::Other);
    s_product(&mut b, g, &LinearExpr::var(x), d, "p").unwrap();
    let m = b.finish();
    for k in 0..=16 {
        let xv = -3.0 + k as f64 * 0.5;
        for dv in [0.0, 1.0] {
            for gv in [dv * xv, dv * xv + 0.5, dv * xv - 0.5, xv] {
                if (-3.0..=5.0).contains(&gv) {
                    ensure(
                        accepts(&m, &[xv, dv, gv]) == (gv == dv * xv),
                        format!("product x={xv} d={dv} g={gv}"),
                    )?;
                    probes += 1;
                }
            }
        }
    }
    Ok(format!("{probes} assignments agree"))
}

/// Slack of every player recomputed by compiling and solving its best
/// response from scratch.
fn recomputed_slack(
    sc: &Scenario,
    states: &[lanegame_core::mld_model::VehicleState],
    step: usize,
    plans: &[lanegame_core::mld_model::Plan],
    neighborhoods: &[Vec<usize>],
) -> Result<f64, String> {
    let params = windowed_params(&sc.params, step, sc.world.horizon);
    let scene = Scene {
        world: &sc.world,
        params: &params,
        states,
    };
    let slots: Vec<_> = plans.iter().cloned().map(Some).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..plans.len() {
        let problem = compile_shared_problem(&scene, i, &neighborhoods[i], &slots)
            .map_err(|e| e.to_string())?;
        let res =
            solve_milp(&problem.instance, &SolverConfig::default()).map_err(|e| e.to_string())?;
        ensure(
            res.is_optimal(),
            format!("vehicle {i}: best response infeasible"),
        )?;
        worst = worst.max(plans[i].tracking_cost(&params[i]) - problem.cost(&res.x));
    }
    Ok(worst)
}

fn convergence(logs: &mut Vec<IterationLog>) -> Outcome {
    // `logs` holds every round of the full two-vehicle runs so far.
    let two_vehicle_worst = logs.iter().map(|l| l.iterations()).max().unwrap_or(0);
    ensure(
        two_vehicle_worst <= 10,
        format!("a two-vehicle round took {two_vehicle_worst} iterations"),
    )?;
    let mut parts = Vec::new();
    for (name, limit) in [
        ("two_lane_swap.toml", 10),
        ("same_lane_follow.toml", 10),
        ("three_lane_merge.toml", 36),
        ("nine_vehicles.toml", 54),
    ] {
        let sc = scenario(name);
        let config = GameConfig {
            eps: sc.world.eps_game,
            order: sc.sim.player_order,
            seed: sc.sim.seed,
            ..GameConfig::default()
        };
        let round = plan_round(
            &sc.world,
            &sc.params,
            &sc.initial,
            0,
            &config,
            &BranchAndBound::default(),
            false,
            None,
        )
        .map_err(|e| format!("{name}: {e}"))?;
        let iters = round.log.iterations();
        ensure(
            iters <= limit,
            format!("{name}: {iters} iterations > {limit}"),
        )?;
        let slack = recomputed_slack(
            &sc,
            &sc.initial,
            0,
            &round.state.plans,
            &round.state.neighborhoods,
        )?;
        ensure(slack <= sc.world.eps_game, format!("{name}: slack {slack}"))?;
        parts.push(format!(
            "{} {iters}/{limit}",
            name.trim_end_matches(".toml")
        ));
        logs.push(round.log);
    }
    Ok(format!(
        "round 0: {}; slack <= eps; every two-vehicle round <= {two_vehicle_worst}",
        parts.join(", ")
    ))
}

fn potential_descent(logs: &[IterationLog], eps: f64) -> Outcome {
    let mut accepted = 0;
    for (r, log) in logs.iter().enumerate() {
        let mut prev: Option<f64> = None;
        for rec in &log.records {
            if rec.improved {
                accepted += 1;
                ensure(
                    rec.j_before - rec.j_after >= eps - 1e-12,
                    format!("log {r} record {}: gain below eps", rec.k),
                )?;
            }
            if let Some(p) = prev {
                let step = rec.potential_after - p;
                let expected = if rec.improved {
                    rec.j_after - rec.j_before
                } else {
                    0.0
                };
                ensure(
                    (step - expected).abs() <= 1e-9,
                    format!("log {r} record {}: potential moved by {step}", rec.k),
                )?;
                ensure(
                    step <= 1e-12,
                    format!("log {r} record {}: potential increased", rec.k),
                )?;
            }
            prev = Some(rec.potential_after);
        }
    }
    Ok(format!("{} logs, {accepted} accepted moves", logs.len()))
}

fn best_response_oracle() -> Outcome {
    let solver = BranchAndBound::default();
    let (mut matched, mut infeasible) = (0, 0);
    for (tau, h) in [(1.0, 0.0), (3.0, 0.0), (2.0, 0.3)] {
        for (k, case) in pair_grid(tau, h).into_iter().enumerate() {
            let scene = Scene {
                world: &case.world,
                params: &case.params,
                states: &case.states,
            };
            let game = Game::new(scene, &solver);
            let br = game
                .best_response(0, &[None, Some(case.other_plan.clone())])
                .map_err(|e| e.to_string())?;
            let oracle = two_vehicle_best_response(
                &case.world,
                &case.params,
                &case.states,
                0,
                &case.other_plan,
            );
            match (br.map(|b| b.cost), oracle) {
                (Some(a), Some(b)) => {
                    ensure(
                        (a - b).abs() <= 1e-6,
                        format!("tau {tau} case {k}: {a} vs {b}"),
                    )?;
                    matched += 1;
                }
                (None, None) => infeasible += 1,
                (a, b) => return Err(format!("tau {tau} case {k}: solver {a:?} oracle {b:?}")),
            }
        }
    }
    Ok(format!(
        "{matched} costs and {infeasible} infeasible cases agree"
    ))
}

fn report(id: usize, name: &str, limit_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut outcome = f();
    let secs = start.elapsed().as_secs_f64();
    if let (Ok(_), Some(limit)) = (&outcome, limit_s) {
        if secs >= limit {
            outcome = Err(format!("took {secs:.1} s, limit {limit} s"));
        }
    }
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("[{tag}] {id} {name}: {detail} ({secs:.2} s)");
    outcome.is_ok()
}

#[test]
fn acceptance() {
    let mut logs = Vec::new();
    let eps = scenario("three_lane_merge.toml").world.eps_game;
    let results = [
        report(1, "longitudinal conflict", Some(5.0), || {
            longitudinal_conflict(&mut logs)
        }),
        report(2, "lateral conflict", Some(5.0), || {
            lateral_conflict(&mut logs)
        }),
        report(3, "count formulas", None, count_formulas),
        report(4, "solver oracle equivalence", Some(30.0), solver_oracle),
        report(5, "pattern truth tables", None, pattern_truth_tables),
        report(6, "best-response iteration convergence", Some(60.0), || {
            convergence(&mut logs)
        }),
        report(7, "potential descent", None, || {
            potential_descent(&logs, eps)
        }),
        report(8, "best-response oracle", None, best_response_oracle),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(k, _)| k + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
