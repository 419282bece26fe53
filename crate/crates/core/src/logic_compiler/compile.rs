//! Assembly of the per-vehicle MILP.
//!
//! Variables of vehicle `i` are ordered `q, v(1..T), z(1..T), a_l(0..T-1),
//! a_r(0..T-1)` followed by 21 auxiliaries per neighbor and step. Per step the
//! own rows are the speed and lane epigraph pairs, the acceleration pair, the
//! indicator-gated lane pair and the indicator exclusion; per neighbor and
//! step the pair block has 67 rows.
//!
//! Horizon step `t` of a pair block carries the same-lane rules on
//! `d(t)`, `l(t)` and the lateral rule on the transition `t-1 -> t`, gated by
//! the indicators of step `t-1`.

use std::collections::BTreeMap;

use super::model::{LinearExpr, MilpInstance, ModelBuilder, Symbol, VarKind};
use super::patterns::{s_and, s_geq, s_leq, s_product, BinArg};
use super::CompileError;
use crate::mld_model::{Lane, Plan, RuleSet, VehicleParams, VehicleState, WorldParams};

/// Variable index by symbol, neighbor tag and step.
pub type SymbolMap = BTreeMap<(Symbol, Option<usize>, usize), usize>;

pub const OWN_VARS_PER_STEP: usize = 4;
pub const OWN_ROWS_PER_STEP: usize = 9;
pub const AUX_VARS_PER_STEP: usize = 21;
pub const AUX_ROWS_PER_STEP: usize = 67;

/// `1 + T (21 |N| + 4)`.
pub fn expected_variable_count(horizon: usize, neighbors: usize) -> usize {
    1 + horizon * (AUX_VARS_PER_STEP * neighbors + OWN_VARS_PER_STEP)
}

/// `T (67 |N| + 9)` with every rule enabled; disabled rules drop their rows.
pub fn expected_constraint_count(horizon: usize, neighbors: usize, rules: RuleSet) -> usize {
    let per_pair = AUX_ROWS_PER_STEP - (!rules.free_space as usize) - 2 * (!rules.lateral as usize);
    horizon * (per_pair * neighbors + OWN_ROWS_PER_STEP)
}

/// Everything the compiler reads about the world at planning time.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub world: &'a WorldParams,
    /// Per-vehicle parameters, references already windowed to the horizon.
    pub params: &'a [VehicleParams],
    pub states: &'a [VehicleState],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnVars {
    pub q: usize,
    pub v: Vec<usize>,
    pub z: Vec<usize>,
    pub a_l: Vec<usize>,
    pub a_r: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CompiledPlanProblem {
    pub instance: MilpInstance,
    pub vehicle: usize,
    pub neighbors: Vec<usize>,
    pub horizon: usize,
    pub own: OwnVars,
    /// `(symbol, neighbor, step)` of every own and auxiliary variable.
    pub symbols: SymbolMap,
    /// Own decision variables `1 + 4T`.
    pub n_own: usize,
    /// Auxiliary variables `21 T |N|`.
    pub n_aux: usize,
    /// Rows of the own problem (own rows plus the pair blocks of `i`).
    pub c_total: usize,
    /// Variables and rows appended to guard the neighbors' pair blocks; zero
    /// for the plain compiled problem.
    pub n_guard: usize,
    pub c_guard: usize,
}

impl CompiledPlanProblem {
    pub fn num_problem_vars(&self) -> usize {
        self.n_own + self.n_aux
    }

    pub fn var(&self, symbol: Symbol, neighbor: Option<usize>, step: usize) -> Option<usize> {
        self.symbols.get(&(symbol, neighbor, step)).copied()
    }

    /// Decodes the own decisions from a (near-)integral assignment.
    pub fn plan_from(&self, x: &[f64]) -> Plan {
        Plan {
            v: self.own.v.iter().map(|&j| x[j]).collect(),
            z: self.own.z.iter().map(|&j| x[j].round() as Lane).collect(),
            a_l: self.own.a_l.iter().map(|&j| x[j] > 0.5).collect(),
            a_r: self.own.a_r.iter().map(|&j| x[j] > 0.5).collect(),
        }
    }

    /// Pins the own decision variables to `plan`, leaving `q` and the
    /// auxiliaries free.
    pub fn fix_plan(&mut self, plan: &Plan) {
        let vars = &mut self.instance.vars;
        let mut pin = |j: usize, value: f64| {
            vars[j].lower = value;
            vars[j].upper = value;
        };
        for t in 0..self.horizon {
            pin(self.own.v[t], plan.v[t]);
            pin(self.own.z[t], plan.z[t] as f64);
            pin(self.own.a_l[t], plan.a_l[t] as u8 as f64);
            pin(self.own.a_r[t], plan.a_r[t] as u8 as f64);
        }
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        x[self.own.q]
    }
}

/// The plain per-vehicle problem: own rows plus one pair block per neighbor,
/// neighbors' plans entering as constants.
pub fn compile_vehicle_milp(
    scene: &Scene<'_>,
    vehicle: usize,
    neighbors: &[usize],
    plans: &[Option<Plan>],
) -> Result<CompiledPlanProblem, CompileError> {
    compile(scene, vehicle, neighbors, plans, false)
}

/// The plain problem extended with, for every neighbor `j`, the pair block `j`
/// holds about `vehicle`, written with `j`'s decisions fixed and `vehicle`'s
/// free. Its feasible set is the set of plans of `vehicle` that keep every
/// neighbor's current plan feasible as well.
pub fn compile_shared_problem(
    scene: &Scene<'_>,
    vehicle: usize,
    neighbors: &[usize],
    plans: &[Option<Plan>],
) -> Result<CompiledPlanProblem, CompileError> {
    compile(scene, vehicle, neighbors, plans, true)
}

fn validate_vehicle(scene: &Scene<'_>, i: usize, horizon: usize) -> Result<(), CompileError> {
    let p = &scene.params[i];
    let s = &scene.states[i];
    let lanes = scene.world.lanes;
    let bad = |reason: String| CompileError::InfeasibleInitialState { vehicle: i, reason };
    if !(p.v_max > 0.0 && p.delta > 0.0 && p.r > 0.0 && p.d0 > 0.0 && p.h >= 0.0) {
        return Err(CompileError::BadInput {
            vehicle: i,
            reason: "v_max, delta, r, d0 must be positive and h non-negative".into(),
        });
    }
    if !(s.v >= 0.0 && s.v <= p.v_max) {
        return Err(bad(format!("speed {} outside [0, {}]", s.v, p.v_max)));
    }
    if s.z < 1 || s.z > lanes {
        return Err(bad(format!("lane {} outside 1..={lanes}", s.z)));
    }
    if s.a_l && s.a_r {
        return Err(bad("both indicators on".into()));
    }
    if p.v_ref.len() < horizon || p.z_ref.len() < horizon {
        return Err(CompileError::BadInput {
            vehicle: i,
            reason: format!("reference profiles shorter than the horizon {horizon}"),
        });
    }
    Ok(())
}

/// Per-step quantities of one side of a pair, step index `0..=T`.
struct Side {
    v: Vec<LinearExpr>,
    z: Vec<LinearExpr>,
    /// Indicators at steps `0..T`.
    a_l: Vec<BinArg>,
    a_r: Vec<BinArg>,
}

impl Side {
    fn fixed(state: &VehicleState, plan: &Plan) -> Side {
        let horizon = plan.horizon();
        Side {
            v: (0..=horizon)
                .map(|t| LinearExpr::constant(plan.speed_at(state, t)))
                .collect(),
            z: (0..=horizon)
                .map(|t| LinearExpr::constant(plan.lane_at(state, t) as f64))
                .collect(),
            a_l: plan.a_l.iter().map(|&b| BinArg::Const(b)).collect(),
            a_r: plan.a_r.iter().map(|&b| BinArg::Const(b)).collect(),
        }
    }

    fn free(state: &VehicleState, own: &OwnVars) -> Side {
        let mut v = vec![LinearExpr::constant(state.v)];
        v.extend(own.v.iter().map(|&j| LinearExpr::var(j)));
        let mut z = vec![LinearExpr::constant(state.z as f64)];
        z.extend(own.z.iter().map(|&j| LinearExpr::var(j)));
        Side {
            v,
            z,
            a_l: own.a_l.iter().map(|&j| BinArg::Var(j)).collect(),
            a_r: own.a_r.iter().map(|&j| BinArg::Var(j)).collect(),
        }
    }
}

/// Which side of a pair block carries the decision variables.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Moving {
    Own,
    Other,
}

struct PairBlock<'a> {
    own: &'a Side,
    other: &'a Side,
    own_params: &'a VehicleParams,
    /// `pos_other - pos_own` at step 0.
    d_init: f64,
    moving: Moving,
    /// Vehicle index recorded on the auxiliaries.
    tag: usize,
    prefix: String,
}

struct PairVars {
    alpha: usize,
    beta: usize,
    eta: usize,
    theta: usize,
    kappa: usize,
    lambda: usize,
    gamma: usize,
    delta: usize,
    zeta: usize,
    mu: usize,
    nu: usize,
    xi: usize,
    f: usize,
    g: usize,
    h: usize,
    k: usize,
    m: usize,
    phi: usize,
    psi: usize,
    p: usize,
    s: usize,
}

fn widened(range: (f64, f64)) -> (f64, f64) {
    (range.0.min(0.0), range.1.max(0.0))
}

fn emit_pair_block(
    b: &mut ModelBuilder,
    world: &WorldParams,
    block: &PairBlock<'_>,
    symbols: Option<&mut SymbolMap>,
) -> Result<(), CompileError> {
    let horizon = block.own.v.len() - 1;
    let tau = world.tau;
    let eps = world.eps_strict;
    let rules = world.rules;
    let mut symbols = symbols;

    // d(t) for t = 0..=T by the Euler update.
    let mut dist = vec![LinearExpr::constant(block.d_init)];
    for t in 0..horizon {
        let next = dist[t].clone() + tau * (block.other.v[t].clone() - &block.own.v[t]);
        dist.push(next);
    }

    for t in 1..=horizon {
        let pre = format!("{}_t{t}", block.prefix);
        let lane_now = block.other.z[t].clone() - &block.own.z[t];
        let lane_prev = block.other.z[t - 1].clone() - &block.own.z[t - 1];
        let d_now = &dist[t];
        let d_prev = &dist[t - 1];
        let ds = LinearExpr::constant(block.own_params.d0) + block.own_params.h * &block.own.v[t];
        let v_rel = block.other.v[t].clone() - &block.own.v[t];
        let (moving_v, sign) = match block.moving {
            Moving::Own => (block.own.v[t].clone(), -1.0),
            Moving::Other => (block.other.v[t].clone(), 1.0),
        };
        let rest = v_rel - sign * &moving_v;
        if !rest.is_constant() {
            return Err(CompileError::Malformed(format!(
                "{pre}: relative speed depends on both vehicles"
            )));
        }
        let rest = rest.constant;

        let d_range = b.range(d_now)?;
        let ds_range = b.range(&ds)?;
        let v_range = b.range(&moving_v)?;
        let z_prev_range = b.range(&block.own.z[t - 1])?;
        let z_now_range = b.range(&block.own.z[t])?;

        let mut add = |b: &mut ModelBuilder, sym: Symbol, kind: VarKind, range: (f64, f64)| {
            let j = b.add_tagged_var(
                format!("{}_{}", pre, sym.name()),
                kind,
                range.0,
                range.1,
                sym,
                Some(block.tag),
                Some(t),
            );
            if let Some(map) = symbols.as_deref_mut() {
                map.insert((sym, Some(block.tag), t), j);
            }
            j
        };
        let bin = (0.0, 1.0);
        let pv = PairVars {
            alpha: add(b, Symbol::Alpha, VarKind::Binary, bin),
            beta: add(b, Symbol::Beta, VarKind::Binary, bin),
            eta: add(b, Symbol::Eta, VarKind::Binary, bin),
            theta: add(b, Symbol::Theta, VarKind::Binary, bin),
            kappa: add(b, Symbol::Kappa, VarKind::Binary, bin),
            lambda: add(b, Symbol::Lambda, VarKind::Binary, bin),
            gamma: add(b, Symbol::Gamma, VarKind::Binary, bin),
            delta: add(b, Symbol::Delta, VarKind::Binary, bin),
            zeta: add(b, Symbol::Zeta, VarKind::Binary, bin),
            mu: add(b, Symbol::Mu, VarKind::Binary, bin),
            nu: add(b, Symbol::Nu, VarKind::Binary, bin),
            xi: add(b, Symbol::Xi, VarKind::Binary, bin),
            f: add(b, Symbol::F, VarKind::Continuous, widened(d_range)),
            g: add(b, Symbol::G, VarKind::Continuous, widened(ds_range)),
            h: add(b, Symbol::H, VarKind::Continuous, widened(d_range)),
            k: add(b, Symbol::K, VarKind::Continuous, widened(v_range)),
            m: add(b, Symbol::M, VarKind::Continuous, widened(v_range)),
            phi: add(b, Symbol::Phi, VarKind::Binary, bin),
            psi: add(b, Symbol::Psi, VarKind::Binary, bin),
            p: add(b, Symbol::P, VarKind::Continuous, widened(z_prev_range)),
            s: add(b, Symbol::S, VarKind::Continuous, widened(z_now_range)),
        };
        let var = LinearExpr::var;
        let start = b.num_constraints();

        // Same lane: alpha = [l <= 0] and [l >= 0].
        s_leq(b, pv.eta, &lane_now, 0.0, eps, &format!("{pre}.eta"))?;
        s_geq(b, pv.theta, &lane_now, 0.0, eps, &format!("{pre}.theta"))?;
        s_and(
            b,
            pv.alpha,
            pv.eta.into(),
            pv.theta.into(),
            &format!("{pre}.alpha"),
        )?;
        // Other ahead: beta = [d >= 0].
        s_geq(b, pv.beta, d_now, 0.0, eps, &format!("{pre}.beta"))?;
        // Other one lane to the left at t-1: gamma = [l <= 1] and [l >= 1].
        s_leq(b, pv.kappa, &lane_prev, 1.0, eps, &format!("{pre}.kappa"))?;
        s_geq(b, pv.lambda, &lane_prev, 1.0, eps, &format!("{pre}.lambda"))?;
        s_and(
            b,
            pv.gamma,
            pv.kappa.into(),
            pv.lambda.into(),
            &format!("{pre}.gamma"),
        )?;
        // Swap intent: own left indicator and other's right indicator.
        s_and(
            b,
            pv.delta,
            block.own.a_l[t - 1],
            block.other.a_r[t - 1],
            &format!("{pre}.delta"),
        )?;
        // Lateral proximity: zeta = [d <= d_hat] and [d >= -d_hat].
        s_leq(b, pv.mu, d_prev, world.d_hat, eps, &format!("{pre}.mu"))?;
        s_geq(b, pv.nu, d_prev, -world.d_hat, eps, &format!("{pre}.nu"))?;
        s_and(
            b,
            pv.zeta,
            pv.mu.into(),
            pv.nu.into(),
            &format!("{pre}.zeta"),
        )?;
        s_and(
            b,
            pv.xi,
            pv.alpha.into(),
            pv.beta.into(),
            &format!("{pre}.xi"),
        )?;
        s_product(b, pv.f, d_now, pv.xi, &format!("{pre}.f"))?;
        s_product(b, pv.g, &ds, pv.alpha, &format!("{pre}.g"))?;
        s_product(b, pv.h, d_now, pv.alpha, &format!("{pre}.h"))?;
        let gap = var(pv.g) + var(pv.h) - 2.0 * var(pv.f);
        b.add_le(gap.clone(), 0.0, format!("{pre}.safety"));
        s_product(b, pv.k, &moving_v, pv.xi, &format!("{pre}.k"))?;
        s_product(b, pv.m, &moving_v, pv.alpha, &format!("{pre}.m"))?;
        if rules.free_space {
            let row = gap
                + 2.0 * tau * sign * (var(pv.m) - 2.0 * var(pv.k))
                + 2.0 * tau * rest * (var(pv.alpha) - 2.0 * var(pv.xi));
            b.add_le(row, 0.0, format!("{pre}.free_space"));
        }
        s_and(
            b,
            pv.phi,
            pv.gamma.into(),
            pv.delta.into(),
            &format!("{pre}.phi"),
        )?;
        s_and(
            b,
            pv.psi,
            pv.zeta.into(),
            pv.phi.into(),
            &format!("{pre}.psi"),
        )?;
        s_product(b, pv.p, &block.own.z[t - 1], pv.psi, &format!("{pre}.p"))?;
        s_product(b, pv.s, &block.own.z[t], pv.psi, &format!("{pre}.s"))?;
        if rules.lateral {
            b.add_le(var(pv.p) - var(pv.s), 0.0, format!("{pre}.hold_lo"));
            b.add_le(var(pv.s) - var(pv.p), 0.0, format!("{pre}.hold_hi"));
        }
        let emitted = b.num_constraints() - start;
        let expected =
            AUX_ROWS_PER_STEP - (!rules.free_space as usize) - 2 * (!rules.lateral as usize);
        assert_eq!(emitted, expected, "pair block row decomposition");
    }
    Ok(())
}

fn compile(
    scene: &Scene<'_>,
    i: usize,
    neighbors: &[usize],
    plans: &[Option<Plan>],
    shared: bool,
) -> Result<CompiledPlanProblem, CompileError> {
    let world = scene.world;
    let horizon = world.horizon;
    validate_vehicle(scene, i, horizon)?;
    let params = &scene.params[i];
    let state = &scene.states[i];
    let lanes = world.lanes;

    let mut neighbor_plans = Vec::with_capacity(neighbors.len());
    for &j in neighbors {
        if j == i {
            return Err(CompileError::BadInput {
                vehicle: i,
                reason: "vehicle listed as its own neighbor".into(),
            });
        }
        let plan =
            plans
                .get(j)
                .and_then(Option::as_ref)
                .ok_or(CompileError::MissingNeighborPlan {
                    vehicle: i,
                    neighbor: j,
                })?;
        if plan.horizon() != horizon
            || plan.z.len() != horizon
            || plan.a_l.len() != horizon
            || plan.a_r.len() != horizon
        {
            return Err(CompileError::BadInput {
                vehicle: i,
                reason: format!("plan of neighbor {j} does not span the horizon {horizon}"),
            });
        }
        neighbor_plans.push(plan);
    }

    let mut b = ModelBuilder::new();
    let mut symbols = BTreeMap::new();

    // Own decision boxes, tightened to what is reachable from the current state.
    let v_ref = &params.v_ref[..horizon];
    let z_ref = &params.z_ref[..horizon];
    let v_box: Vec<(f64, f64)> = (1..=horizon)
        .map(|t| {
            let reach = params.delta * t as f64;
            (
                (state.v - reach).max(0.0),
                (state.v + reach).min(params.v_max),
            )
        })
        .collect();
    let z_box: Vec<(f64, f64)> = (1..=horizon)
        .map(|t| {
            let reach = t as Lane;
            (
                (state.z - reach).max(1) as f64,
                (state.z + reach).min(lanes) as f64,
            )
        })
        .collect();
    let mut q_hi: f64 = 0.0;
    for t in 0..horizon {
        q_hi = q_hi
            .max((v_box[t].0 - v_ref[t]).abs())
            .max((v_box[t].1 - v_ref[t]).abs())
            .max(params.r * (z_box[t].0 - z_ref[t] as f64).abs())
            .max(params.r * (z_box[t].1 - z_ref[t] as f64).abs());
    }

    let q = b.add_tagged_var("q", VarKind::Continuous, 0.0, q_hi, Symbol::Q, None, None);
    symbols.insert((Symbol::Q, None, 0), q);
    let mut own = OwnVars {
        q,
        v: Vec::with_capacity(horizon),
        z: Vec::with_capacity(horizon),
        a_l: Vec::with_capacity(horizon),
        a_r: Vec::with_capacity(horizon),
    };
    for t in 1..=horizon {
        let j = b.add_tagged_var(
            format!("v_t{t}"),
            VarKind::Continuous,
            v_box[t - 1].0,
            v_box[t - 1].1,
            Symbol::V,
            None,
            Some(t),
        );
        symbols.insert((Symbol::V, None, t), j);
        own.v.push(j);
    }
    for t in 1..=horizon {
        let j = b.add_tagged_var(
            format!("z_t{t}"),
            VarKind::Integer,
            z_box[t - 1].0,
            z_box[t - 1].1,
            Symbol::Z,
            None,
            Some(t),
        );
        symbols.insert((Symbol::Z, None, t), j);
        own.z.push(j);
    }
    for (sym, list) in [
        (Symbol::ALeft, &mut own.a_l),
        (Symbol::ARight, &mut own.a_r),
    ] {
        for t in 0..horizon {
            let j = b.add_tagged_var(
                format!("{}_t{t}", sym.name()),
                VarKind::Binary,
                0.0,
                1.0,
                sym,
                None,
                Some(t),
            );
            symbols.insert((sym, None, t), j);
            list.push(j);
        }
    }
    b.set_objective(LinearExpr::var(q));

    let var = LinearExpr::var;
    let qx = var(q);
    for t in 1..=horizon {
        let v = var(own.v[t - 1]);
        let z = var(own.z[t - 1]);
        let al = var(own.a_l[t - 1]);
        let ar = var(own.a_r[t - 1]);
        let (v_prev, z_prev) = if t == 1 {
            (
                LinearExpr::constant(state.v),
                LinearExpr::constant(state.z as f64),
            )
        } else {
            (var(own.v[t - 2]), var(own.z[t - 2]))
        };
        let vr = v_ref[t - 1];
        let zr = z_ref[t - 1] as f64;
        b.add_le(v.clone() - vr - qx.clone(), 0.0, format!("t{t}.epi_v_hi"));
        b.add_le(-v.clone() + vr - qx.clone(), 0.0, format!("t{t}.epi_v_lo"));
        b.add_le(
            params.r * (z.clone() - zr) - qx.clone(),
            0.0,
            format!("t{t}.epi_z_hi"),
        );
        b.add_le(
            -params.r * (z.clone() - zr) - qx.clone(),
            0.0,
            format!("t{t}.epi_z_lo"),
        );
        b.add_le(
            v.clone() - v_prev.clone(),
            params.delta,
            format!("t{t}.accel"),
        );
        b.add_le(v_prev - v, params.delta, format!("t{t}.decel"));
        b.add_le(
            z.clone() - z_prev.clone() - al.clone(),
            0.0,
            format!("t{t}.lane_left"),
        );
        b.add_le(z_prev - z - ar.clone(), 0.0, format!("t{t}.lane_right"));
        b.add_le(al + ar, 1.0, format!("t{t}.indicator_xor"));
    }
    debug_assert_eq!(b.num_constraints(), horizon * OWN_ROWS_PER_STEP);

    let own_side = Side::free(state, &own);
    let other_sides: Vec<Side> = neighbors
        .iter()
        .zip(&neighbor_plans)
        .map(|(&j, plan)| Side::fixed(&scene.states[j], plan))
        .collect();

    for (k, &j) in neighbors.iter().enumerate() {
        let block = PairBlock {
            own: &own_side,
            other: &other_sides[k],
            own_params: params,
            d_init: scene.states[j].pos - state.pos,
            moving: Moving::Own,
            tag: j,
            prefix: format!("j{j}"),
        };
        emit_pair_block(&mut b, world, &block, Some(&mut symbols))?;
    }

    let n_own = 1 + OWN_VARS_PER_STEP * horizon;
    let n_aux = AUX_VARS_PER_STEP * horizon * neighbors.len();
    let c_total = b.num_constraints();
    assert_eq!(
        b.num_vars(),
        expected_variable_count(horizon, neighbors.len())
    );
    assert_eq!(
        c_total,
        expected_constraint_count(horizon, neighbors.len(), world.rules)
    );

    if shared {
        for (k, &j) in neighbors.iter().enumerate() {
            let block = PairBlock {
                own: &other_sides[k],
                other: &own_side,
                own_params: &scene.params[j],
                d_init: state.pos - scene.states[j].pos,
                moving: Moving::Other,
                tag: j,
                prefix: format!("guard_j{j}"),
            };
            emit_pair_block(&mut b, world, &block, None)?;
        }
    }
    let n_guard = b.num_vars() - n_own - n_aux;
    let c_guard = b.num_constraints() - c_total;

    Ok(CompiledPlanProblem {
        instance: b.finish(),
        vehicle: i,
        neighbors: neighbors.to_vec(),
        horizon,
        own,
        symbols,
        n_own,
        n_aux,
        c_total,
        n_guard,
        c_guard,
    })
}
