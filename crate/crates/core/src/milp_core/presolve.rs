//! Activity-based bound propagation and the root reduction built on it.

use crate::logic_compiler::{MilpInstance, VarKind};

/// Rows `a x <= b` in sparse form over a contiguous variable range.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Infeasible;

/// Minimum and maximum of `a x` over the box, counting infinite contributions
/// separately so single-variable residuals stay finite.
struct Activity {
    min: f64,
    max: f64,
    min_inf: usize,
    max_inf: usize,
}

fn activity(row: &[(usize, f64)], lo: &[f64], up: &[f64]) -> Activity {
    let mut a = Activity {
        min: 0.0,
        max: 0.0,
        min_inf: 0,
        max_inf: 0,
    };
    for &(j, c) in row {
        let (lo_c, hi_c) = if c > 0.0 {
            (c * lo[j], c * up[j])
        } else {
            (c * up[j], c * lo[j])
        };
        if lo_c.is_finite() {
            a.min += lo_c;
        } else {
            a.min_inf += 1;
        }
        if hi_c.is_finite() {
            a.max += hi_c;
        } else {
            a.max_inf += 1;
        }
    }
    a
}

pub(crate) fn round_integer_bounds(
    kinds: &[VarKind],
    lo: &mut [f64],
    up: &mut [f64],
    int_tol: f64,
) {
    for (j, k) in kinds.iter().enumerate() {
        if k.is_integer() {
            lo[j] = (lo[j] - int_tol).ceil();
            up[j] = (up[j] + int_tol).floor();
        }
    }
}

/// Tightens `lo`/`up` until a fixed point or `max_passes`. Returns whether any
/// bound moved.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propagate(
    rows: &SparseRows,
    active: &[bool],
    kinds: &[VarKind],
    lo: &mut [f64],
    up: &mut [f64],
    feas_tol: f64,
    int_tol: f64,
    max_passes: usize,
) -> Result<bool, Infeasible> {
    let mut changed_any = false;
    for _ in 0..max_passes {
        let mut changed = false;
        for (r, row) in rows.rows.iter().enumerate() {
            if !active[r] {
                continue;
            }
            let b = rows.rhs[r];
            let act = activity(row, lo, up);
            if act.min_inf == 0 && act.min > b + feas_tol * (1.0 + b.abs()) {
                return Err(Infeasible);
            }
            if act.min_inf > 1 {
                continue;
            }
            for &(j, c) in row {
                let (own_min, own_inf) = {
                    let v = if c > 0.0 { c * lo[j] } else { c * up[j] };
                    if v.is_finite() {
                        (v, false)
                    } else {
                        (0.0, true)
                    }
                };
                // Residual minimum activity of the other terms.
                let rest = if own_inf {
                    if act.min_inf != 1 {
                        continue;
                    }
                    act.min
                } else {
                    if act.min_inf != 0 {
                        continue;
                    }
                    act.min - own_min
                };
                let bound = (b - rest) / c;
                if c > 0.0 {
                    let mut nu = bound;
                    if kinds[j].is_integer() {
                        nu = (nu + int_tol).floor();
                    }
                    if nu < up[j] - 1e-9 * (1.0 + up[j].abs().min(1e9))
                        && (kinds[j].is_integer() || significant(lo[j], up[j], nu))
                    {
                        up[j] = nu;
                        changed = true;
                    }
                } else {
                    let mut nl = bound;
                    if kinds[j].is_integer() {
                        nl = (nl - int_tol).ceil();
                    }
                    if nl > lo[j] + 1e-9 * (1.0 + lo[j].abs().min(1e9))
                        && (kinds[j].is_integer() || significant(lo[j], up[j], nl))
                    {
                        lo[j] = nl;
                        changed = true;
                    }
                }
                if lo[j] > up[j] {
                    if lo[j] - up[j] <= feas_tol * (1.0 + lo[j].abs()) && !kinds[j].is_integer() {
                        let mid = 0.5 * (lo[j] + up[j]);
                        lo[j] = mid;
                        up[j] = mid;
                    } else {
                        return Err(Infeasible);
                    }
                }
            }
        }
        changed_any |= changed;
        if !changed {
            break;
        }
    }
    Ok(changed_any)
}

/// Continuous tightenings must shrink the box noticeably to be worth another pass.
fn significant(lo: f64, up: f64, new: f64) -> bool {
    let width = up - lo;
    if !width.is_finite() {
        return true;
    }
    let moved = if new < up { up - new } else { new - lo };
    moved > 1e-3 * width.max(1e-6)
}

/// The root problem after propagation: redundant rows dropped, fixed
/// variables substituted out.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    /// Original index of each kept variable.
    pub kept: Vec<usize>,
    pub kinds: Vec<VarKind>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
    pub cost: Vec<f64>,
    pub rows: SparseRows,
    pub obj_const: f64,
    /// Full-length assignment with the fixed values filled in.
    pub fixed: Vec<f64>,
}

impl Reduced {
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.fixed.clone();
        for (k, &j) in self.kept.iter().enumerate() {
            full[j] = x[k];
        }
        full
    }
}

pub(crate) fn presolve(
    instance: &MilpInstance,
    relax_integrality: bool,
    feas_tol: f64,
    int_tol: f64,
) -> Result<Reduced, Infeasible> {
    let n = instance.num_vars();
    let kinds: Vec<VarKind> = instance
        .vars
        .iter()
        .map(|v| {
            if relax_integrality {
                VarKind::Continuous
            } else {
                v.kind
            }
        })
        .collect();
    let mut lo: Vec<f64> = instance.vars.iter().map(|v| v.lower).collect();
    let mut up: Vec<f64> = instance.vars.iter().map(|v| v.upper).collect();
    round_integer_bounds(&kinds, &mut lo, &mut up, int_tol);
    if (0..n).any(|j| lo[j] > up[j]) {
        return Err(Infeasible);
    }
    let rows = SparseRows {
        rows: instance
            .constraints
            .iter()
            .map(|c| c.lhs.terms().filter(|&(_, a)| a != 0.0).collect())
            .collect(),
        rhs: instance
            .constraints
            .iter()
            .map(|c| c.rhs - c.lhs.constant)
            .collect(),
    };
    let mut active = vec![true; rows.rows.len()];
    propagate(
        &rows, &active, &kinds, &mut lo, &mut up, feas_tol, int_tol, 50,
    )?;

    for (r, row) in rows.rows.iter().enumerate() {
        let act = activity(row, &lo, &up);
        if act.max_inf == 0 && act.max <= rows.rhs[r] {
            active[r] = false;
        }
        if row.is_empty() && rows.rhs[r] < -feas_tol {
            return Err(Infeasible);
        }
    }

    let fixed_mask: Vec<bool> = (0..n).map(|j| lo[j] == up[j]).collect();
    let mut fixed = vec![0.0; n];
    for j in 0..n {
        if fixed_mask[j] {
            fixed[j] = lo[j];
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&j| !fixed_mask[j]).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &j) in kept.iter().enumerate() {
        new_index[j] = k;
    }
    let mut reduced_rows = SparseRows::default();
    for (r, row) in rows.rows.iter().enumerate() {
        if !active[r] {
            continue;
        }
        let mut b = rows.rhs[r];
        let mut terms = Vec::with_capacity(row.len());
        for &(j, c) in row {
            if fixed_mask[j] {
                b -= c * fixed[j];
            } else {
                terms.push((new_index[j], c));
            }
        }
        if terms.is_empty() {
            if b < -feas_tol * (1.0 + rows.rhs[r].abs()) {
                return Err(Infeasible);
            }
            continue;
        }
        reduced_rows.rows.push(terms);
        reduced_rows.rhs.push(b);
    }
    let mut cost = vec![0.0; kept.len()];
    let mut obj_const = instance.objective.constant;
    for (j, c) in instance.objective.terms() {
        if fixed_mask[j] {
            obj_const += c * fixed[j];
        } else {
            cost[new_index[j]] = c;
        }
    }
    Ok(Reduced {
        kinds: kept.iter().map(|&j| kinds[j]).collect(),
        lo: kept.iter().map(|&j| lo[j]).collect(),
        up: kept.iter().map(|&j| up[j]).collect(),
        kept,
        cost,
        rows: reduced_rows,
        obj_const,
        fixed,
    })
}
