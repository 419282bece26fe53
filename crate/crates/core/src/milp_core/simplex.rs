//! Dense-tableau bounded simplex over rows `a x + s = b`, `s >= 0`.
//!
//! The tableau holds `B^-1 [A | I]`; the slack block doubles as the basis
//! inverse. Reduced costs do not depend on bounds, so any basis reached by a
//! previous solve is dual feasible for new bounds once the nonbasic columns
//! are moved to the bound matching the sign of their reduced cost. That makes
//! the dual simplex the workhorse for branch-and-bound; the primal simplex
//! cleans up residual dual infeasibility left by rounding. Updates skip zero
//! entries of the pivot row and column, which keeps pivots cheap on the
//! block-sparse instances the compiler produces.

use super::presolve::SparseRows;

/// Stand-in for infinite bounds; a solution resting on one signals an
/// unbounded direction.
pub(crate) const BIG: f64 = 1e7;
const PIVOT_TOL: f64 = 1e-7;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct NumericalTrouble(pub String);

#[derive(Debug, Clone)]
pub(crate) struct Simplex<'a> {
    rows: &'a SparseRows,
    cost: &'a [f64],
    n: usize,
    m: usize,
    w: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    x: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    artificial: Vec<bool>,
    feas_tol: f64,
    opt_tol: f64,
    pub iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    pub fn new(rows: &'a SparseRows, cost: &'a [f64], n: usize, feas_tol: f64) -> Self {
        let m = rows.rows.len();
        let w = n + m;
        let mut s = Simplex {
            rows,
            cost,
            n,
            m,
            w,
            tab: Vec::new(),
            beta: Vec::new(),
            d: Vec::new(),
            basis: Vec::new(),
            row_of: Vec::new(),
            x: vec![0.0; w],
            lo: vec![0.0; w],
            up: vec![f64::INFINITY; w],
            artificial: vec![false; w],
            feas_tol,
            opt_tol: 1e-9,
            iterations: 0,
            max_iterations: 20_000 + 50 * w,
            since_refactor: 0,
        };
        s.reset_to_slack_basis();
        s
    }

    fn reset_to_slack_basis(&mut self) {
        let (m, w, n) = (self.m, self.w, self.n);
        self.tab = vec![0.0; m * w];
        for (i, row) in self.rows.rows.iter().enumerate() {
            for &(j, a) in row {
                self.tab[i * w + j] += a;
            }
            self.tab[i * w + n + i] = 1.0;
        }
        self.beta = self.rows.rhs.clone();
        self.d = vec![0.0; w];
        self.d[..n].copy_from_slice(self.cost);
        self.basis = (n..w).collect();
        self.row_of = vec![usize::MAX; w];
        for i in 0..m {
            self.row_of[n + i] = i;
        }
        self.since_refactor = 0;
    }

    /// Installs bounds for the structural columns; infinite ends become `BIG`.
    pub fn set_bounds(&mut self, lo: &[f64], up: &[f64]) {
        for j in 0..self.n {
            let (l, u) = (lo[j], up[j]);
            self.artificial[j] = !l.is_finite() || !u.is_finite();
            self.lo[j] = if l.is_finite() { l } else { -BIG };
            self.up[j] = if u.is_finite() { u } else { BIG };
        }
    }

    fn is_basic(&self, j: usize) -> bool {
        self.row_of[j] != usize::MAX
    }

    /// Moves each nonbasic column to the bound its reduced cost prefers.
    fn place_nonbasic(&mut self) {
        for j in 0..self.w {
            if self.is_basic(j) {
                continue;
            }
            let (l, u) = (self.lo[j], self.up[j]);
            self.x[j] = if l == u || !u.is_finite() {
                l
            } else if self.d[j] < -self.opt_tol {
                u
            } else if self.d[j] > self.opt_tol || self.x[j] != u {
                l
            } else {
                u
            };
        }
    }

    fn recompute_basic(&mut self) {
        let nonzero: Vec<usize> = (0..self.w)
            .filter(|&j| !self.is_basic(j) && self.x[j] != 0.0)
            .collect();
        for i in 0..self.m {
            let row = &self.tab[i * self.w..(i + 1) * self.w];
            let mut v = self.beta[i];
            for &j in &nonzero {
                v -= row[j] * self.x[j];
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn dual_infeasibility(&self, j: usize) -> f64 {
        if self.is_basic(j) || self.lo[j] == self.up[j] {
            return 0.0;
        }
        let d = self.d[j];
        if self.x[j] <= self.lo[j] {
            (-d).max(0.0)
        } else if self.x[j] >= self.up[j] {
            d.max(0.0)
        } else {
            d.abs()
        }
    }

    fn dual_feasible(&self) -> bool {
        (0..self.w).all(|j| self.dual_infeasibility(j) <= self.opt_tol * 10.0)
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        (self.lo[j] - self.x[j])
            .max(self.x[j] - self.up[j])
            .max(0.0)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.w;
        let piv = self.tab[r * w + q];
        let inv = 1.0 / piv;
        let mut nz = Vec::new();
        let mut vals = Vec::new();
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    nz.push(j);
                    vals.push(*v);
                }
            }
            row[q] = 1.0;
        }
        self.beta[r] *= inv;
        let beta_r = self.beta[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            for (k, &j) in nz.iter().enumerate() {
                let v = row[j] - f * vals[k];
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
            self.beta[i] -= f * beta_r;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (k, &j) in nz.iter().enumerate() {
                self.d[j] -= f * vals[k];
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basis[r];
        self.row_of[leaving] = usize::MAX;
        self.row_of[q] = r;
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Rebuilds the tableau for the current basis from the original rows.
    fn refactor(&mut self) {
        let target: Vec<usize> = {
            let mut t: Vec<usize> = self.basis.iter().copied().filter(|&j| j < self.n).collect();
            t.sort_unstable();
            t
        };
        let keep_slack: Vec<bool> = (0..self.m).map(|i| self.is_basic(self.n + i)).collect();
        let x_saved = self.x.clone();
        let iterations = self.iterations;
        self.reset_to_slack_basis();
        for q in target {
            let w = self.w;
            let mut best = None;
            let mut best_abs = PIVOT_TOL;
            for i in 0..self.m {
                let b = self.basis[i];
                if b >= self.n && !keep_slack[b - self.n] {
                    let a = self.tab[i * w + q].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(i);
                    }
                }
            }
            if let Some(r) = best {
                self.pivot(r, q);
            }
        }
        self.iterations = iterations;
        self.since_refactor = 0;
        self.x = x_saved;
        // Reduced costs from scratch: d = c - c_B B^-1 [A | I].
        let w = self.w;
        let mut d = vec![0.0; w];
        d[..self.n].copy_from_slice(self.cost);
        for i in 0..self.m {
            let cb = if self.basis[i] < self.n {
                self.cost[self.basis[i]]
            } else {
                0.0
            };
            if cb != 0.0 {
                let row = &self.tab[i * w..(i + 1) * w];
                for j in 0..w {
                    d[j] -= cb * row[j];
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        self.d = d;
        for j in 0..w {
            if !self.is_basic(j) {
                self.x[j] = self.x[j].clamp(self.lo[j], self.up[j]);
            }
        }
        self.recompute_basic();
    }

    fn dual_simplex(&mut self) -> Result<Outcome, NumericalTrouble> {
        let w = self.w;
        let mut degenerate = 0usize;
        loop {
            if self.iterations > self.max_iterations {
                return Err(NumericalTrouble("simplex iteration limit".into()));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let tol = self.feas_tol * 0.1;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let inf = self.primal_infeasibility(b);
                if inf <= tol {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((r, v)) => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            inf > v
                        }
                    }
                };
                if better {
                    leave = Some((i, inf));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let b = self.basis[r];
            let to_lower = self.x[b] < self.lo[b];
            let bound = if to_lower { self.lo[b] } else { self.up[b] };
            let s = if to_lower { 1.0 } else { -1.0 };
            let row = &self.tab[r * w..(r + 1) * w];

            // Harris two-pass ratio test.
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut bound_ratio = f64::INFINITY;
            for j in 0..w {
                let alpha = row[j];
                if alpha.abs() <= PIVOT_TOL || self.is_basic(j) || self.lo[j] == self.up[j] {
                    continue;
                }
                let at_lower = self.x[j] <= self.lo[j];
                let at_upper = self.x[j] >= self.up[j];
                let sa = s * alpha;
                let ok = if at_lower {
                    sa < 0.0
                } else if at_upper {
                    sa > 0.0
                } else {
                    true
                };
                if !ok {
                    continue;
                }
                let dj = if at_lower {
                    self.d[j].max(0.0)
                } else if at_upper {
                    (-self.d[j]).max(0.0)
                } else {
                    self.d[j].abs()
                };
                cands.push((j, dj, alpha.abs()));
                bound_ratio = bound_ratio.min((dj + self.opt_tol) / alpha.abs());
            }
            if cands.is_empty() {
                return Ok(Outcome::Infeasible);
            }
            let mut pick: Option<(usize, f64, f64)> = None;
            for &(j, dj, a) in &cands {
                let ratio = dj / a;
                if bland {
                    match pick {
                        Some((_, best_ratio, _)) if ratio >= best_ratio - 1e-12 => {}
                        _ => pick = Some((j, ratio, a)),
                    }
                } else if ratio <= bound_ratio {
                    match pick {
                        Some((_, _, best_a)) if a <= best_a => {}
                        _ => pick = Some((j, ratio, a)),
                    }
                }
            }
            let (q, ratio, _) = pick.expect("Harris bound admits the minimum-ratio candidate");
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let alpha_q = self.tab[r * w + q];
            let delta = (self.x[b] - bound) / alpha_q;
            for i in 0..self.m {
                let a = self.tab[i * w + q];
                if a != 0.0 {
                    let bi = self.basis[i];
                    self.x[bi] -= a * delta;
                }
            }
            self.x[q] += delta;
            self.x[b] = bound;
            self.pivot(r, q);
        }
    }

    fn primal_simplex(&mut self) -> Result<Outcome, NumericalTrouble> {
        let w = self.w;
        let mut degenerate = 0usize;
        loop {
            if self.iterations > self.max_iterations {
                return Err(NumericalTrouble("simplex iteration limit".into()));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..w {
                if self.is_basic(j) || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = self.d[j];
                let can_up = self.x[j] < self.up[j];
                let can_down = self.x[j] > self.lo[j];
                let (dir, score) = if d < -self.opt_tol && can_up {
                    (1.0, -d)
                } else if d > self.opt_tol && can_down {
                    (-1.0, d)
                } else {
                    continue;
                };
                let better = match enter {
                    None => true,
                    Some((_, _, s)) => !bland && score > s,
                };
                if better {
                    enter = Some((j, dir, score));
                }
            }
            let Some((q, dir, _)) = enter else {
                return Ok(Outcome::Optimal);
            };
            let mut step = self.up[q] - self.lo[q];
            let mut leave: Option<(usize, f64)> = None;
            let mut best_a = 0.0;
            for i in 0..self.m {
                let a = self.tab[i * w + q] * dir;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, target) = if a > 0.0 {
                    ((self.x[b] - self.lo[b]).max(0.0) / a, self.lo[b])
                } else {
                    ((self.up[b] - self.x[b]).max(0.0) / -a, self.up[b])
                };
                if !limit.is_finite() {
                    continue;
                }
                let tie = (limit - step).abs() <= 1e-12;
                if limit < step - 1e-12 || (tie && leave.is_some() && a.abs() > best_a) {
                    step = limit;
                    leave = Some((i, target));
                    best_a = a.abs();
                }
            }
            if !step.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.m {
                let a = self.tab[i * w + q];
                if a != 0.0 {
                    let bi = self.basis[i];
                    self.x[bi] -= a * dir * step;
                }
            }
            self.x[q] += dir * step;
            match leave {
                None => {
                    self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                }
                Some((r, target)) => {
                    let b = self.basis[r];
                    self.x[b] = target;
                    self.pivot(r, q);
                }
            }
        }
    }

    /// Checks the optimal point against the original rows.
    fn residual_ok(&self) -> bool {
        let x = &self.x[..self.n];
        let tol = self.feas_tol;
        for (i, row) in self.rows.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            let b = self.rows.rhs[i];
            if act > b + tol * (1.0 + b.abs()).min(10.0) * 0.5 {
                return false;
            }
        }
        (0..self.n).all(|j| self.primal_infeasibility(j) <= tol * 0.5)
    }

    /// Verifies the infeasibility proof held by row `r` in fresh arithmetic:
    /// the combination `y^T (A x + s) = y^T b` with `y` the row of `B^-1`
    /// must be unattainable over the bounds. Multipliers below the pivot
    /// tolerance with the sign that would open a slack's range are dropped;
    /// any `y` yields a valid proof, so this only sharpens it.
    fn infeasibility_certified(&self) -> bool {
        let w = self.w;
        for r in 0..self.m {
            let b = self.basis[r];
            if self.primal_infeasibility(b) <= self.feas_tol * 0.1 {
                continue;
            }
            let raw = &self.tab[r * w + self.n..(r + 1) * w];
            for sign in [1.0, -1.0] {
                let y: Vec<f64> = raw
                    .iter()
                    .map(|&v| {
                        if sign * v < 0.0 && v.abs() <= 1e-7 {
                            0.0
                        } else {
                            v
                        }
                    })
                    .collect();
                if self.combination_unattainable(&y) {
                    return true;
                }
            }
        }
        false
    }

    fn combination_unattainable(&self, y: &[f64]) -> bool {
        let mut g = vec![0.0; self.n];
        let mut rhs = 0.0;
        for (i, row) in self.rows.rows.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            rhs += y[i] * self.rows.rhs[i];
            for &(j, a) in row {
                g[j] += y[i] * a;
            }
        }
        let (mut lo, mut hi) = (0.0, 0.0);
        let mut add = |c: f64, l: f64, u: f64| {
            if c > 0.0 {
                lo += c * l;
                hi += c * u;
            } else if c < 0.0 {
                lo += c * u;
                hi += c * l;
            }
        };
        for j in 0..self.n {
            if self.artificial[j] && g[j].abs() > 1e-9 {
                // Cannot conclude over an artificial box.
                add(g[j], f64::NEG_INFINITY, f64::INFINITY);
            } else {
                add(g[j], self.lo[j], self.up[j]);
            }
        }
        for &yi in y {
            add(yi, 0.0, f64::INFINITY);
        }
        let scale = 1.0 + rhs.abs();
        rhs < lo - 1e-9 * scale || rhs > hi + 1e-9 * scale
    }

    /// Solves for the installed bounds, starting from the current basis.
    pub fn solve(&mut self) -> Result<Outcome, NumericalTrouble> {
        self.place_nonbasic();
        self.recompute_basic();
        let mut refactored = false;
        let mut reset = false;
        loop {
            if !self.dual_feasible() {
                if reset {
                    return Err(NumericalTrouble("lost dual feasibility after reset".into()));
                }
                self.reset_to_slack_basis();
                self.place_nonbasic();
                self.recompute_basic();
                reset = true;
                continue;
            }
            match self.dual_simplex()? {
                Outcome::Infeasible => {
                    if self.infeasibility_certified() {
                        return Ok(Outcome::Infeasible);
                    }
                    if refactored {
                        return Err(NumericalTrouble("uncertified infeasibility".into()));
                    }
                    self.refactor();
                    refactored = true;
                    continue;
                }
                Outcome::Optimal => {}
                Outcome::Unbounded => unreachable!("dual simplex never reports unboundedness"),
            }
            if !self.dual_feasible() && self.primal_simplex()? == Outcome::Unbounded {
                return Ok(Outcome::Unbounded);
            }
            if self.residual_ok() {
                if self.rests_on_artificial_bound() {
                    return Ok(Outcome::Unbounded);
                }
                return Ok(Outcome::Optimal);
            }
            if refactored {
                return Err(NumericalTrouble(
                    "residual check failed after refactor".into(),
                ));
            }
            self.refactor();
            refactored = true;
        }
    }

    fn rests_on_artificial_bound(&self) -> bool {
        (0..self.n).any(|j| {
            self.artificial[j]
                && self.x[j].abs() >= BIG * (1.0 - 1e-9)
                && (self.is_basic(j) || self.d[j].abs() > self.opt_tol)
        })
    }

    pub fn primal(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }
}
