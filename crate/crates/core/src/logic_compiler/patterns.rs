//! Big-M systems turning logical relations over linear predicates into
//! mixed-integer linear rows.
//!
//! The bounds `m = min f`, `M = max f` are taken by interval arithmetic over
//! the variable boxes declared in the builder. The strict side of every
//! equivalence is enforced with the violation threshold `eps`: for
//! `[delta = 1] <=> [f >= c]` the value `delta = 0` forces `f <= c - eps`.

use super::model::{LinearExpr, ModelBuilder, VarKind};
use super::CompileError;

/// Argument of the purely binary patterns: a binary variable or a fixed bit
/// (a neighbor's decision enters the own problem as a constant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinArg {
    Var(usize),
    Const(bool),
}

impl BinArg {
    pub fn expr(self) -> LinearExpr {
        match self {
            BinArg::Var(j) => LinearExpr::var(j),
            BinArg::Const(b) => LinearExpr::constant(b as u8 as f64),
        }
    }
}

impl From<usize> for BinArg {
    fn from(j: usize) -> Self {
        BinArg::Var(j)
    }
}

fn require_binary(b: &ModelBuilder, j: usize) -> Result<(), CompileError> {
    let v = b.var(j);
    if v.kind != VarKind::Binary {
        return Err(CompileError::NotBinary(v.name.clone()));
    }
    Ok(())
}

fn require_binary_arg(b: &ModelBuilder, a: BinArg) -> Result<(), CompileError> {
    match a {
        BinArg::Var(j) => require_binary(b, j),
        BinArg::Const(_) => Ok(()),
    }
}

fn fixed(b: &mut ModelBuilder, delta: usize, value: bool, label: &str) -> [usize; 2] {
    let v = value as u8 as f64;
    [
        b.add_le(LinearExpr::var(delta), v, format!("{label}.hi")),
        b.add_ge(LinearExpr::var(delta), v, format!("{label}.lo")),
    ]
}

/// `[delta = 1] <=> [f >= c]`:
/// `(c - m) delta <= f - m` and `(M - c + eps) delta >= f - c + eps`.
///
/// When the predicate has a constant truth value on the box the two rows pin
/// `delta` instead. A box lying wholly inside the gap `(c - eps, c)` also
/// pins it, to the side of the box midpoint relative to `c - eps/2`; the
/// big-M rows would otherwise shrink to nothing and admit neither value.
pub fn s_geq(
    b: &mut ModelBuilder,
    delta: usize,
    f: &LinearExpr,
    c: f64,
    eps: f64,
    label: &str,
) -> Result<[usize; 2], CompileError> {
    require_binary(b, delta)?;
    let (m, big_m) = b.range(f)?;
    if c <= m {
        return Ok(fixed(b, delta, true, label));
    }
    if big_m <= c - eps {
        return Ok(fixed(b, delta, false, label));
    }
    if m > c - eps && big_m < c {
        return Ok(fixed(b, delta, 0.5 * (m + big_m) >= c - 0.5 * eps, label));
    }
    let d = LinearExpr::var(delta);
    let r1 = b.add_le((c - m) * &d - f.clone() + m, 0.0, format!("{label}.1"));
    let r2 = b.add_le(
        f.clone() - c + eps - (big_m - c + eps) * &d,
        0.0,
        format!("{label}.2"),
    );
    Ok([r1, r2])
}

/// `[delta = 1] <=> [f <= c]`:
/// `(M - c) delta <= M - f` and `(c + eps - m) delta >= eps + c - f`.
/// Pinning follows [`s_geq`].
pub fn s_leq(
    b: &mut ModelBuilder,
    delta: usize,
    f: &LinearExpr,
    c: f64,
    eps: f64,
    label: &str,
) -> Result<[usize; 2], CompileError> {
    require_binary(b, delta)?;
    let (m, big_m) = b.range(f)?;
    if big_m <= c {
        return Ok(fixed(b, delta, true, label));
    }
    if m >= c + eps {
        return Ok(fixed(b, delta, false, label));
    }
    if m > c && big_m < c + eps {
        return Ok(fixed(b, delta, 0.5 * (m + big_m) <= c + 0.5 * eps, label));
    }
    let d = LinearExpr::var(delta);
    let r1 = b.add_le(
        (big_m - c) * &d + f.clone() - big_m,
        0.0,
        format!("{label}.1"),
    );
    let r2 = b.add_le(
        LinearExpr::constant(eps + c) - f.clone() - (c + eps - m) * &d,
        0.0,
        format!("{label}.2"),
    );
    Ok([r1, r2])
}

/// `[delta = 1] <=> [sigma = 1] and [gamma = 1]`.
pub fn s_and(
    b: &mut ModelBuilder,
    delta: usize,
    sigma: BinArg,
    gamma: BinArg,
    label: &str,
) -> Result<[usize; 3], CompileError> {
    require_binary(b, delta)?;
    require_binary_arg(b, sigma)?;
    require_binary_arg(b, gamma)?;
    let d = LinearExpr::var(delta);
    Ok([
        b.add_le(d.clone() - sigma.expr(), 0.0, format!("{label}.1")),
        b.add_le(d.clone() - gamma.expr(), 0.0, format!("{label}.2")),
        b.add_le(sigma.expr() + gamma.expr() - d, 1.0, format!("{label}.3")),
    ])
}

/// `[delta = 1] <=> [sigma = 1] or [gamma = 1]`.
pub fn s_or(
    b: &mut ModelBuilder,
    delta: usize,
    sigma: BinArg,
    gamma: BinArg,
    label: &str,
) -> Result<[usize; 3], CompileError> {
    require_binary(b, delta)?;
    require_binary_arg(b, sigma)?;
    require_binary_arg(b, gamma)?;
    let d = LinearExpr::var(delta);
    Ok([
        b.add_le(sigma.expr() - d.clone(), 0.0, format!("{label}.1")),
        b.add_le(gamma.expr() - d.clone(), 0.0, format!("{label}.2")),
        b.add_le(d - sigma.expr() - gamma.expr(), 0.0, format!("{label}.3")),
    ])
}

/// `g = delta * f`: `m delta <= g <= M delta` and
/// `-M (1 - delta) <= g - f <= -m (1 - delta)`.
pub fn s_product(
    b: &mut ModelBuilder,
    g: usize,
    f: &LinearExpr,
    delta: usize,
    label: &str,
) -> Result<[usize; 4], CompileError> {
    require_binary(b, delta)?;
    let (m, big_m) = b.range(f)?;
    let gv = b.var(g);
    if gv.lower > 0.0 || gv.upper < 0.0 {
        return Err(CompileError::Malformed(format!(
            "product variable {} cannot take the value 0",
            gv.name
        )));
    }
    let d = LinearExpr::var(delta);
    let gx = LinearExpr::var(g);
    Ok([
        b.add_le(m * &d - gx.clone(), 0.0, format!("{label}.1")),
        b.add_le(gx.clone() - big_m * &d, 0.0, format!("{label}.2")),
        b.add_le(
            f.clone() - gx.clone() + big_m * &d,
            big_m,
            format!("{label}.3"),
        ),
        b.add_le(gx - f.clone() - m * &d, -m, format!("{label}.4")),
    ])
}
