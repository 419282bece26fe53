//! Reference solvers and fixtures shared by the integration tests. Nothing
//! here calls into the crate's solver.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use lanegame_core::logic_compiler::{LinearExpr, MilpInstance, ModelBuilder, Symbol, VarKind};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

/// Dense LP `min c x  s.t.  a x <= b,  lo <= x <= up` with finite bounds.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
}

impl DenseLp {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let rows = self
            .a
            .iter()
            .zip(&self.b)
            .all(|(row, &b)| dot(row, x) <= b + tol);
        let bounds = (0..self.n()).all(|j| x[j] >= self.lo[j] - tol && x[j] <= self.up[j] + tol);
        rows && bounds
    }

    pub fn to_instance(&self, integer: &[bool]) -> MilpInstance {
        let mut b = ModelBuilder::new();
        for j in 0..self.n() {
            let kind = if integer[j] {
                VarKind::Integer
            } else {
                VarKind::Continuous
            };
            b.add_var(format!("x{j}"), kind, self.lo[j], self.up[j], Symbol::Other);
        }
        for (r, (row, &rhs)) in self.a.iter().zip(&self.b).enumerate() {
            let mut e = LinearExpr::zero();
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    e.add_term(j, a);
                }
            }
            b.add_le(e, rhs, format!("r{r}"));
        }
        let mut obj = LinearExpr::zero();
        for (j, &c) in self.c.iter().enumerate() {
            if c != 0.0 {
                obj.add_term(j, c);
            }
        }
        b.set_objective(obj);
        b.finish()
    }
}

pub fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x).sum()
}

/// Optimum by enumerating every basic solution: each choice of `n` tight
/// constraints among rows and bounds is solved and kept if feasible. Exact for
/// bounded problems; only usable for a handful of variables.
pub fn lp_by_vertices(lp: &DenseLp) -> Option<(f64, Vec<f64>)> {
    let n = lp.n();
    if n == 0 {
        return lp.feasible(&[], 1e-9).then(|| (0.0, Vec::new()));
    }
    // Every candidate hyperplane as (normal, rhs).
    let mut planes: Vec<(Vec<f64>, f64)> = lp.a.iter().cloned().zip(lp.b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lo[j]));
        planes.push((e, lp.up[j]));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = Vec::with_capacity(n);
    choose(planes.len(), n, 0, &mut pick, &mut |idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&k| planes[k].0.clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = gauss_solve(m, r) {
            if lp.feasible(&x, 1e-9) {
                let obj = dot(&lp.c, &x);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x));
                }
            }
        }
    });
    best
}

fn choose(
    total: usize,
    k: usize,
    start: usize,
    pick: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            break;
        }
        pick.push(i);
        choose(total, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, p);
        r.swap(col, p);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[row][k] -= f * m[col][k];
                    }
                    r[row] -= f * r[col];
                }
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

/// Textbook two-phase tableau simplex with Bland's rule. Bounds become rows
/// after shifting `x = lo + y`. Slow and simple; used as an oracle.
pub fn lp_by_bland(lp: &DenseLp) -> Option<(f64, Vec<f64>)> {
    let n = lp.n();
    // Rows over y >= 0: a y <= b - a lo, and y_j <= up_j - lo_j.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &b) in lp.a.iter().zip(&lp.b) {
        rows.push((row.clone(), b - dot(row, &lp.lo)));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e, lp.up[j] - lp.lo[j]));
    }
    let m = rows.len();
    // Columns: y (n), slacks (m), artificials (m).
    let w = n + 2 * m;
    let mut tab = vec![vec![0.0; w + 1]; m];
    let mut basis = vec![0usize; m];
    for (i, (row, rhs)) in rows.iter().enumerate() {
        let s = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = s * row[j];
        }
        tab[i][n + i] = s;
        tab[i][n + m + i] = 1.0;
        tab[i][w] = s * rhs;
        basis[i] = n + m + i;
    }
    // Phase 1: minimize the artificial sum.
    let mut cost1 = vec![0.0; w];
    for c in cost1.iter_mut().skip(n + m) {
        *c = 1.0;
    }
    run_bland(&mut tab, &mut basis, &cost1, w);
    let infeas: f64 = (0..m)
        .filter(|&i| basis[i] >= n + m)
        .map(|i| tab[i][w])
        .sum();
    if infeas > 1e-7 {
        return None;
    }
    // Drive remaining artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n + m {
            if let Some(q) = (0..n + m).find(|&j| tab[i][j].abs() > 1e-9) {
                pivot(&mut tab, &mut basis, i, q, w);
            }
        }
    }
    // Phase 2 with artificial columns frozen at zero.
    let mut cost2 = vec![0.0; w];
    cost2[..n].copy_from_slice(&lp.c);
    for row in tab.iter_mut() {
        for v in row.iter_mut().skip(n + m).take(m) {
            *v = 0.0;
        }
    }
    run_bland(&mut tab, &mut basis, &cost2, n + m);
    let mut y = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            y[basis[i]] = tab[i][w];
        }
    }
    let x: Vec<f64> = (0..n).map(|j| lp.lo[j] + y[j]).collect();
    Some((dot(&lp.c, &x), x))
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], r: usize, q: usize, w: usize) {
    let p = tab[r][q];
    for v in tab[r].iter_mut() {
        *v /= p;
    }
    for i in 0..tab.len() {
        if i != r {
            let f = tab[i][q];
            if f != 0.0 {
                for k in 0..=w {
                    tab[i][k] -= f * tab[r][k];
                }
            }
        }
    }
    basis[r] = q;
}

/// Minimizes `cost` over the first `cols` columns; the problem is bounded by
/// construction (every structural column has an upper-bound row).
fn run_bland(tab: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], cols: usize) {
    let w = tab[0].len() - 1;
    loop {
        let reduced = |j: usize| -> f64 {
            let cb: f64 = (0..tab.len()).map(|i| cost[basis[i]] * tab[i][j]).sum();
            cost[j] - cb
        };
        let Some(q) = (0..cols).find(|&j| !basis.contains(&j) && reduced(j) < -1e-10) else {
            return;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..tab.len() {
            if tab[i][q] > 1e-10 {
                let ratio = tab[i][w] / tab[i][q];
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave.expect("bounded problem");
        pivot(tab, basis, r, q, w);
    }
}

/// Random LP with small integer data and finite boxes.
pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseLp {
    let mut int = |lo: i32, hi: i32| rng.gen_range(lo..=hi) as f64;
    let lo: Vec<f64> = (0..n).map(|_| int(-3, 0)).collect();
    let up: Vec<f64> = lo.iter().map(|l| l + int(1, 5)).collect();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| int(-4, 4)).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|_| int(-6, 8)).collect();
    let c: Vec<f64> = (0..n).map(|_| int(-5, 5)).collect();
    DenseLp { c, a, b, lo, up }
}

/// Random MILP: the first `ints` variables are integer with small boxes whose
/// domain sizes multiply to at most 4096, the rest continuous.
pub fn random_milp(
    rng: &mut ChaCha8Rng,
    ints: usize,
    conts: usize,
    rows: usize,
) -> (DenseLp, Vec<bool>) {
    let n = ints + conts;
    let mut lo = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    let mut product = 1usize;
    for j in 0..n {
        let l = rng.gen_range(-2..=0) as f64;
        let mut width = rng.gen_range(1..=3usize);
        if j < ints {
            let remaining = ints - j - 1;
            // Reserve at least two values for every later integer.
            while width > 1 && product * (width + 1) * (1usize << remaining) > 4096 {
                width -= 1;
            }
            product *= width + 1;
        }
        lo.push(l);
        up.push(l + width as f64);
    }
    let a: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..n).map(|_| rng.gen_range(-4..=4) as f64).collect())
        .collect();
    let b: Vec<f64> = (0..rows).map(|_| rng.gen_range(-5..=6) as f64).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    let integer = (0..n).map(|j| j < ints).collect();
    (DenseLp { c, a, b, lo, up }, integer)
}

/// Exhaustive optimum: every integer assignment, each completed by the
/// textbook LP over the continuous variables.
pub fn milp_by_enumeration(lp: &DenseLp, integer: &[bool]) -> Option<f64> {
    let ints: Vec<usize> = (0..lp.n()).filter(|&j| integer[j]).collect();
    let conts: Vec<usize> = (0..lp.n()).filter(|&j| !integer[j]).collect();
    let mut values: Vec<f64> = ints.iter().map(|&j| lp.lo[j]).collect();
    let mut best: Option<f64> = None;
    loop {
        let sub = DenseLp {
            c: conts.iter().map(|&j| lp.c[j]).collect(),
            a: lp
                .a
                .iter()
                .map(|row| conts.iter().map(|&j| row[j]).collect())
                .collect(),
            b: lp
                .a
                .iter()
                .zip(&lp.b)
                .map(|(row, &b)| {
                    b - ints
                        .iter()
                        .zip(&values)
                        .map(|(&j, v)| row[j] * v)
                        .sum::<f64>()
                })
                .collect(),
            lo: conts.iter().map(|&j| lp.lo[j]).collect(),
            up: conts.iter().map(|&j| lp.up[j]).collect(),
        };
        let fixed: f64 = ints.iter().zip(&values).map(|(&j, v)| lp.c[j] * v).sum();
        let sol = if conts.is_empty() {
            sub.feasible(&[], 1e-9).then_some(0.0)
        } else {
            lp_by_bland(&sub).map(|(obj, _)| obj)
        };
        if let Some(obj) = sol {
            let total = obj + fixed;
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
        // Odometer step over the integer boxes.
        let mut k = 0;
        loop {
            if k == ints.len() {
                return best;
            }
            if values[k] < lp.up[ints[k]] {
                values[k] += 1.0;
                break;
            }
            values[k] = lp.lo[ints[k]];
            k += 1;
        }
    }
}

use lanegame_core::mld_model::{Lane, Plan, RuleSet, VehicleParams, VehicleState, WorldParams};

pub fn world(lanes: Lane, horizon: usize, rules: RuleSet) -> WorldParams {
    WorldParams {
        lanes,
        horizon,
        tau: 1.0,
        d_bar: 1000.0,
        d_hat: 20.0,
        eps_game: 1e-3,
        eps_strict: 1e-4,
        rules,
    }
}

pub fn vehicle(id: usize, horizon: usize, v_ref: f64, z_ref: Lane) -> VehicleParams {
    VehicleParams {
        id,
        v_max: 36.0,
        delta: 4.0,
        r: 1.0,
        d0: 5.0,
        h: 0.0,
        v_ref: vec![v_ref; horizon],
        z_ref: vec![z_ref; horizon],
    }
}

pub fn state(pos: f64, v: f64, z: Lane) -> VehicleState {
    VehicleState {
        pos,
        v,
        z,
        a_l: false,
        a_r: false,
    }
}

pub fn hold_slots(states: &[VehicleState], horizon: usize) -> Vec<Option<Plan>> {
    states
        .iter()
        .map(|s| Some(Plan::hold(s, horizon)))
        .collect()
}

/// Affine function of the oracle LP variables `[v(1..=T), q]`.
#[derive(Debug, Clone)]
struct Aff {
    c: Vec<f64>,
    k: f64,
}

impl Aff {
    fn constant(n: usize, k: f64) -> Aff {
        Aff { c: vec![0.0; n], k }
    }
    fn var(n: usize, j: usize) -> Aff {
        let mut a = Aff::constant(n, 0.0);
        a.c[j] = 1.0;
        a
    }
    fn is_constant(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }
    fn scale(&self, s: f64) -> Aff {
        Aff {
            c: self.c.iter().map(|x| x * s).collect(),
            k: self.k * s,
        }
    }
    fn plus(&self, o: &Aff) -> Aff {
        Aff {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
            k: self.k + o.k,
        }
    }
}

/// `g >= 0` as an LP row `-g <= 0`.
fn push_nonneg(lp: &mut DenseLp, g: &Aff) {
    lp.a.push(g.c.iter().map(|x| -x).collect());
    lp.b.push(g.k);
}

/// A predicate `[g >= 0]` whose false side is `g <= -eps`.
struct Predicate(Aff);

/// Best-response cost of vehicle `me` in a two-vehicle scene, by enumerating
/// every indicator and lane sequence, and every truth assignment of the
/// distance predicates, each leaf solved as an LP over the speeds. The rules
/// are stated directly from their meaning, not from the compiled rows.
pub fn two_vehicle_best_response(
    w: &WorldParams,
    params: &[VehicleParams],
    states: &[VehicleState],
    me: usize,
    other_plan: &Plan,
) -> Option<f64> {
    let horizon = w.horizon;
    let other = 1 - me;
    let (p, s, ps, so) = (&params[me], &states[me], &params[other], &states[other]);
    let n = horizon + 1;
    let eps = w.eps_strict;
    let tau = w.tau;

    // Own speed at step t as an affine function; the other's as a constant.
    let v_me = |t: usize| {
        if t == 0 {
            Aff::constant(n, s.v)
        } else {
            Aff::var(n, t - 1)
        }
    };
    let v_other = |t: usize| other_plan.speed_at(so, t);
    let z_other = |t: usize| other_plan.lane_at(so, t);
    // d(t) = pos_other - pos_me.
    let mut dist = vec![Aff::constant(n, so.pos - s.pos)];
    for t in 0..horizon {
        let next = dist[t]
            .plus(&v_me(t).scale(-tau))
            .plus(&Aff::constant(n, tau * v_other(t)));
        dist.push(next);
    }

    let mut best: Option<f64> = None;
    let choices = [(false, false), (true, false), (false, true)];
    let mut ind = vec![0usize; horizon];
    loop {
        let a_l: Vec<bool> = ind.iter().map(|&c| choices[c].0).collect();
        let a_r: Vec<bool> = ind.iter().map(|&c| choices[c].1).collect();
        for lanes in lane_sequences(s.z, &a_l, &a_r, w.lanes) {
            let z_me = |t: usize| if t == 0 { s.z } else { lanes[t - 1] };
            // Collect rows implied by each predicate branch.
            let mut preds: Vec<Predicate> = Vec::new();
            // Each rule reads the truth values of its predicates, adds its rows
            // and reports whether the discrete part is admissible.
            let mut rules: Vec<RuleFn> = Vec::new();
            for t in 1..=horizon {
                for (sign, own_d0, own_h, own_v, other_v, own_z, oth_z, own_left, oth_right) in [
                    // Block held by `me` about `other`.
                    (
                        1.0,
                        p.d0,
                        p.h,
                        v_me(t),
                        Aff::constant(n, v_other(t)),
                        [z_me(t - 1), z_me(t)],
                        [z_other(t - 1), z_other(t)],
                        a_l[t - 1],
                        other_plan.a_r[t - 1],
                    ),
                    // Block held by `other` about `me`.
                    (
                        -1.0,
                        ps.d0,
                        ps.h,
                        Aff::constant(n, v_other(t)),
                        v_me(t),
                        [z_other(t - 1), z_other(t)],
                        [z_me(t - 1), z_me(t)],
                        other_plan.a_l[t - 1],
                        a_r[t - 1],
                    ),
                ] {
                    let d_now = dist[t].scale(sign);
                    let d_prev = dist[t - 1].scale(sign);
                    let same_lane = own_z[1] == oth_z[1];
                    let beta = preds.len();
                    preds.push(Predicate(d_now.clone()));
                    let mu = preds.len();
                    preds.push(Predicate(
                        Aff::constant(n, w.d_hat).plus(&d_prev.scale(-1.0)),
                    ));
                    let nu = preds.len();
                    preds.push(Predicate(d_prev.plus(&Aff::constant(n, w.d_hat))));
                    let ds = Aff::constant(n, own_d0).plus(&own_v.scale(own_h));
                    let ahead_term = d_now.plus(&other_v.plus(&own_v.scale(-1.0)).scale(2.0 * tau));
                    let free_space = w.rules.free_space;
                    let lateral = w.rules.lateral;
                    let swap_intent = oth_z[0] - own_z[0] == 1 && own_left && oth_right;
                    let holds_lane = own_z[1] == own_z[0];
                    rules.push(Box::new(move |truth, lp| {
                        if same_lane {
                            let side = if truth(beta) { 1.0 } else { -1.0 };
                            push_nonneg(lp, &d_now.scale(side).plus(&ds.scale(-1.0)));
                            if free_space {
                                push_nonneg(lp, &ahead_term.scale(side).plus(&ds.scale(-1.0)));
                            }
                        }
                        !(lateral && swap_intent && truth(mu) && truth(nu) && !holds_lane)
                    }));
                }
            }
            best = min_opt(best, solve_branches(n, p, s.v, &lanes, &preds, &rules, eps));
        }
        // Next indicator sequence.
        let mut k = 0;
        loop {
            if k == horizon {
                return best;
            }
            ind[k] += 1;
            if ind[k] < choices.len() {
                break;
            }
            ind[k] = 0;
            k += 1;
        }
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

fn lane_sequences(z0: Lane, a_l: &[bool], a_r: &[bool], lanes: Lane) -> Vec<Vec<Lane>> {
    let mut out = vec![Vec::new()];
    for t in 0..a_l.len() {
        let mut next = Vec::new();
        for seq in &out {
            let prev = if t == 0 { z0 } else { seq[t - 1] };
            let lo = (prev - a_r[t] as Lane).max(1);
            let hi = (prev + a_l[t] as Lane).min(lanes);
            for z in lo..=hi {
                let mut s = seq.clone();
                s.push(z);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

type RuleFn<'a> = Box<dyn Fn(&dyn Fn(usize) -> bool, &mut DenseLp) -> bool + 'a>;

fn solve_branches(
    n: usize,
    p: &VehicleParams,
    v0: f64,
    lanes: &[Lane],
    preds: &[Predicate],
    rules: &[RuleFn<'_>],
    eps: f64,
) -> Option<f64> {
    // Constant predicates have a fixed truth value; the rest are branched.
    let mut fixed: Vec<Option<bool>> = Vec::with_capacity(preds.len());
    for pr in preds {
        if pr.0.is_constant() {
            let g = pr.0.k;
            if g > -eps && g < 0.0 {
                // Inside the strict gap neither side holds.
                return None;
            }
            fixed.push(Some(g >= 0.0));
        } else {
            fixed.push(None);
        }
    }
    let free: Vec<usize> = (0..preds.len()).filter(|&k| fixed[k].is_none()).collect();
    let mut best = None;
    for mask in 0..(1u64 << free.len()) {
        let mut truth_v: Vec<bool> = fixed.iter().map(|f| f.unwrap_or(false)).collect();
        for (bit, &k) in free.iter().enumerate() {
            truth_v[k] = mask >> bit & 1 == 1;
        }
        let mut lp = base_lp(n, p, v0, lanes);
        for &k in &free {
            if truth_v[k] {
                push_nonneg(&mut lp, &preds[k].0);
            } else {
                // g <= -eps.
                lp.a.push(preds[k].0.c.clone());
                lp.b.push(-eps - preds[k].0.k);
            }
        }
        let truth = |k: usize| truth_v[k];
        let mut ok = true;
        for r in rules {
            ok &= r(&truth, &mut lp);
        }
        if ok {
            best = min_opt(best, lp_by_bland(&lp).map(|(obj, _)| obj));
        }
    }
    best
}

/// Speed limits, acceleration limits and the tracking epigraph for fixed lanes.
fn base_lp(n: usize, p: &VehicleParams, v0: f64, lanes: &[Lane]) -> DenseLp {
    let horizon = lanes.len();
    let q = horizon;
    let mut c = vec![0.0; n];
    c[q] = 1.0;
    let mut lp = DenseLp {
        c,
        a: Vec::new(),
        b: Vec::new(),
        lo: vec![0.0; n],
        up: (0..n).map(|j| if j == q { 1e3 } else { p.v_max }).collect(),
    };
    let lane_dev = (0..horizon)
        .map(|t| p.r * (lanes[t] - p.z_ref[t]).abs() as f64)
        .fold(0.0, f64::max);
    lp.lo[q] = lane_dev;
    for t in 0..horizon {
        let mut row = vec![0.0; n];
        row[t] = 1.0;
        row[q] = -1.0;
        lp.a.push(row.clone());
        lp.b.push(p.v_ref[t]);
        row[t] = -1.0;
        lp.a.push(row);
        lp.b.push(-p.v_ref[t]);
        // |v(t) - v(t-1)| <= delta.
        let mut acc = vec![0.0; n];
        acc[t] = 1.0;
        let prev = if t == 0 { v0 } else { 0.0 };
        if t > 0 {
            acc[t - 1] = -1.0;
        }
        lp.a.push(acc.clone());
        lp.b.push(p.delta + prev);
        lp.a.push(acc.iter().map(|x| -x).collect());
        lp.b.push(p.delta - prev);
    }
    lp
}

/// A two-vehicle instance of the best-response comparison grid.
pub struct PairCase {
    pub world: WorldParams,
    pub params: Vec<VehicleParams>,
    pub states: Vec<VehicleState>,
    pub other_plan: Plan,
}

/// Coarse grid over gaps, lane layouts, references and neighbor plans at
/// horizon 2 with two lanes. Vehicle 0 is the responder.
pub fn pair_grid(tau: f64, h: f64) -> Vec<PairCase> {
    let mut cases = Vec::new();
    for gap in [-22.0, -9.0, 6.0, 14.0] {
        for (z0, z1) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            for own_ref in [1, 2] {
                for variant in 0..4 {
                    let horizon = 2;
                    let mut w = world(2, horizon, RuleSet::all());
                    w.tau = tau;
                    let mut p0 = vehicle(0, horizon, 28.0, own_ref);
                    p0.h = h;
                    let p1 = vehicle(1, horizon, 18.0, z0);
                    let states = vec![state(0.0, 22.0, z0), state(gap, 18.0, z1)];
                    let s1 = states[1];
                    let toward = if z0 > z1 {
                        (true, false)
                    } else {
                        (false, true)
                    };
                    let other_plan = match variant {
                        0 => Plan::hold(&s1, horizon),
                        1 => Plan {
                            v: vec![22.0, 26.0],
                            ..Plan::hold(&s1, horizon)
                        },
                        2 if z0 != z1 => Plan {
                            v: vec![18.0, 18.0],
                            z: vec![z0, z0],
                            a_l: vec![toward.0, false],
                            a_r: vec![toward.1, false],
                        },
                        _ => Plan {
                            v: vec![14.0, 10.0],
                            ..Plan::hold(&s1, horizon)
                        },
                    };
                    cases.push(PairCase {
                        world: w,
                        params: vec![p0, p1],
                        states,
                        other_plan,
                    });
                }
            }
        }
    }
    cases
}

/// Random two-vehicle case at horizon 2: close gaps, random references and a
/// random neighbor plan obeying its own speed and lane limits.
pub fn random_pair_case(rng: &mut ChaCha8Rng) -> PairCase {
    let horizon = 2;
    let lanes: Lane = rng.gen_range(2..=3);
    let mut w = world(lanes, horizon, RuleSet::all());
    w.tau = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
    w.d_hat = rng.gen_range(8.0..25.0);
    let mut params = Vec::new();
    let mut states = Vec::new();
    for id in 0..2 {
        let mut p = vehicle(
            id,
            horizon,
            rng.gen_range(10.0..34.0),
            rng.gen_range(1..=lanes),
        );
        p.h = [0.0, 0.2][rng.gen_range(0..2)];
        p.r = rng.gen_range(1.0..4.0);
        p.v_ref[1] = rng.gen_range(10.0..34.0);
        params.push(p);
        states.push(state(
            0.0,
            rng.gen_range(12.0..30.0),
            rng.gen_range(1..=lanes),
        ));
    }
    states[1].pos = rng.gen_range(-25.0..25.0);
    let s1 = states[1];
    let mut plan = Plan::hold(&s1, horizon);
    let (mut v, mut z) = (s1.v, s1.z);
    for t in 0..horizon {
        let dir = rng.gen_range(0..3);
        plan.a_l[t] = dir == 1 && z < lanes;
        plan.a_r[t] = dir == 2 && z > 1;
        if rng.gen_bool(0.7) {
            z += plan.a_l[t] as Lane - plan.a_r[t] as Lane;
        }
        v = (v + rng.gen_range(-4.0..4.0)).clamp(0.0, 36.0);
        plan.v[t] = v;
        plan.z[t] = z;
    }
    PairCase {
        world: w,
        params,
        states,
        other_plan: plan,
    }
}

/// Variable and row counts of a plain per-vehicle problem with `neighbors`
/// neighbors on a three-lane road.
pub fn compiled_pair_problem_counts(horizon: usize, neighbors: usize) -> (usize, usize) {
    use lanegame_core::logic_compiler::{compile_vehicle_milp, Scene};
    let w = world(3, horizon, RuleSet::all());
    let params: Vec<_> = (0..=neighbors)
        .map(|k| vehicle(k, horizon, 25.0, 2))
        .collect();
    let states: Vec<_> = (0..=neighbors)
        .map(|k| state(40.0 * k as f64 - 50.0, 20.0, 1 + (k as Lane % 3)))
        .collect();
    let scene = Scene {
        world: &w,
        params: &params,
        states: &states,
    };
    let others: Vec<usize> = (1..=neighbors).collect();
    let p = compile_vehicle_milp(&scene, 0, &others, &hold_slots(&states, horizon)).unwrap();
    (p.instance.num_vars(), p.instance.num_constraints())
}
