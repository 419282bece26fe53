use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use super::CompileError;

/// Affine function `sum_j c_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub coefficients: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinearExpr {
            coefficients: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coef: f64) -> Self {
        let mut e = Self::zero();
        e.add_term(index, coef);
        e
    }

    pub fn add_term(&mut self, index: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let slot = self.coefficients.entry(index).or_insert(0.0);
        *slot += coef;
        if *slot == 0.0 {
            self.coefficients.remove(&index);
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// The single variable of `1.0 * x`, if the expression is exactly that.
    pub fn as_single_var(&self) -> Option<usize> {
        if self.constant != 0.0 || self.coefficients.len() != 1 {
            return None;
        }
        let (&j, &c) = self.coefficients.iter().next()?;
        (c == 1.0).then_some(j)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .coefficients
                .iter()
                .map(|(&j, &c)| c * x[j])
                .sum::<f64>()
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coefficients.iter().map(|(&j, &c)| (j, c))
    }
}

impl Add for LinearExpr {
    type Output = LinearExpr;
    fn add(mut self, rhs: LinearExpr) -> LinearExpr {
        self += rhs;
        self
    }
}

impl Add<&LinearExpr> for LinearExpr {
    type Output = LinearExpr;
    fn add(mut self, rhs: &LinearExpr) -> LinearExpr {
        self += rhs.clone();
        self
    }
}

impl Add<f64> for LinearExpr {
    type Output = LinearExpr;
    fn add(mut self, rhs: f64) -> LinearExpr {
        self.constant += rhs;
        self
    }
}

impl AddAssign for LinearExpr {
    fn add_assign(&mut self, rhs: LinearExpr) {
        for (j, c) in rhs.coefficients {
            self.add_term(j, c);
        }
        self.constant += rhs.constant;
    }
}

impl Sub for LinearExpr {
    type Output = LinearExpr;
    fn sub(mut self, rhs: LinearExpr) -> LinearExpr {
        self -= rhs;
        self
    }
}

impl Sub<&LinearExpr> for LinearExpr {
    type Output = LinearExpr;
    fn sub(mut self, rhs: &LinearExpr) -> LinearExpr {
        self -= rhs.clone();
        self
    }
}

impl Sub<f64> for LinearExpr {
    type Output = LinearExpr;
    fn sub(mut self, rhs: f64) -> LinearExpr {
        self.constant -= rhs;
        self
    }
}

impl SubAssign for LinearExpr {
    fn sub_assign(&mut self, rhs: LinearExpr) {
        for (j, c) in rhs.coefficients {
            self.add_term(j, -c);
        }
        self.constant -= rhs.constant;
    }
}

impl Mul<f64> for LinearExpr {
    type Output = LinearExpr;
    fn mul(mut self, rhs: f64) -> LinearExpr {
        if rhs == 0.0 {
            return LinearExpr::zero();
        }
        for c in self.coefficients.values_mut() {
            *c *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Mul<LinearExpr> for f64 {
    type Output = LinearExpr;
    fn mul(self, rhs: LinearExpr) -> LinearExpr {
        rhs * self
    }
}

impl Mul<&LinearExpr> for f64 {
    type Output = LinearExpr;
    fn mul(self, rhs: &LinearExpr) -> LinearExpr {
        rhs.clone() * self
    }
}

impl Neg for LinearExpr {
    type Output = LinearExpr;
    fn neg(self) -> LinearExpr {
        self * -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integer(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

/// Role of a variable inside a compiled plan problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Q,
    V,
    Z,
    ALeft,
    ARight,
    Alpha,
    Beta,
    Eta,
    Theta,
    Kappa,
    Lambda,
    Gamma,
    Delta,
    Zeta,
    Mu,
    Nu,
    Xi,
    F,
    G,
    H,
    K,
    M,
    Phi,
    Psi,
    P,
    S,
    /// Free-standing variable of a hand-built instance.
    Other,
}

impl Symbol {
    /// The auxiliary symbols introduced once per neighbor and step.
    pub const AUXILIARY: [Symbol; 21] = [
        Symbol::Alpha,
        Symbol::Beta,
        Symbol::Eta,
        Symbol::Theta,
        Symbol::Kappa,
        Symbol::Lambda,
        Symbol::Gamma,
        Symbol::Delta,
        Symbol::Zeta,
        Symbol::Mu,
        Symbol::Nu,
        Symbol::Xi,
        Symbol::F,
        Symbol::G,
        Symbol::H,
        Symbol::K,
        Symbol::M,
        Symbol::Phi,
        Symbol::Psi,
        Symbol::P,
        Symbol::S,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Symbol::Q => "q",
            Symbol::V => "v",
            Symbol::Z => "z",
            Symbol::ALeft => "al",
            Symbol::ARight => "ar",
            Symbol::Alpha => "alpha",
            Symbol::Beta => "beta",
            Symbol::Eta => "eta",
            Symbol::Theta => "theta",
            Symbol::Kappa => "kappa",
            Symbol::Lambda => "lambda",
            Symbol::Gamma => "gamma",
            Symbol::Delta => "delta",
            Symbol::Zeta => "zeta",
            Symbol::Mu => "mu",
            Symbol::Nu => "nu",
            Symbol::Xi => "xi",
            Symbol::F => "f",
            Symbol::G => "g",
            Symbol::H => "h",
            Symbol::K => "k",
            Symbol::M => "m",
            Symbol::Phi => "phi",
            Symbol::Psi => "psi",
            Symbol::P => "p",
            Symbol::S => "s",
            Symbol::Other => "x",
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub index: usize,
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub symbol: Symbol,
    /// Neighbor vehicle index for pair auxiliaries.
    pub neighbor: Option<usize>,
    /// Horizon step.
    pub step: Option<usize>,
}

/// One row `lhs <= rhs`; `lhs` never carries a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub lhs: LinearExpr,
    pub rhs: f64,
    pub label: String,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.lhs.eval(x)
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        (self.activity(x) - self.rhs).max(0.0)
    }
}

/// `min objective s.t. constraints, bounds, integrality`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpInstance {
    pub objective: LinearExpr,
    pub constraints: Vec<Constraint>,
    pub vars: Vec<VarInfo>,
}

impl MilpInstance {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest violation over rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .map(|v| (v.lower - x[v.index]).max(x[v.index] - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Like [`MilpInstance::max_violation`], with each row's violation
    /// divided by its largest coefficient magnitude when that exceeds one.
    pub fn max_scaled_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| {
                let scale = c.lhs.terms().map(|(_, a)| a.abs()).fold(1.0, f64::max);
                c.violation(x) / scale
            })
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .map(|v| (v.lower - x[v.index]).max(x[v.index] - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn max_integrality_gap(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .filter(|v| v.kind.is_integer())
            .map(|v| (x[v.index] - x[v.index].round()).abs())
            .fold(0.0, f64::max)
    }

    /// Checks that rows only reference declared variables and that bounds are sane.
    pub fn validate(&self) -> Result<(), CompileError> {
        let n = self.vars.len();
        for (k, v) in self.vars.iter().enumerate() {
            if v.index != k {
                return Err(CompileError::Malformed(format!(
                    "variable {} stored at position {k}",
                    v.name
                )));
            }
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(CompileError::Malformed(format!(
                    "variable {} has empty box [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(CompileError::NotBinary(v.name.clone()));
            }
        }
        let exprs = self
            .constraints
            .iter()
            .map(|c| &c.lhs)
            .chain(std::iter::once(&self.objective));
        for e in exprs {
            if let Some((&j, _)) = e.coefficients.iter().next_back() {
                if j >= n {
                    return Err(CompileError::Malformed(format!(
                        "reference to undeclared variable {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Interval of `expr` over the variable boxes.
    pub fn range(&self, expr: &LinearExpr) -> Result<(f64, f64), CompileError> {
        let mut lo = expr.constant;
        let mut hi = expr.constant;
        for (j, c) in expr.terms() {
            let v = &self.vars[j];
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(CompileError::Unbounded(v.name.clone()));
            }
            if c > 0.0 {
                lo += c * v.lower;
                hi += c * v.upper;
            } else {
                lo += c * v.upper;
                hi += c * v.lower;
            }
        }
        Ok((lo, hi))
    }
}

/// Incremental construction of a [`MilpInstance`].
#[derive(Debug, Clone, Default)]
pub struct ModelBuilder {
    instance: MilpInstance,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        symbol: Symbol,
    ) -> usize {
        self.add_tagged_var(name, kind, lower, upper, symbol, None, None)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_tagged_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        symbol: Symbol,
        neighbor: Option<usize>,
        step: Option<usize>,
    ) -> usize {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        let index = self.instance.vars.len();
        self.instance.vars.push(VarInfo {
            index,
            name: name.into(),
            kind,
            lower,
            upper,
            symbol,
            neighbor,
            step,
        });
        index
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, Symbol::Other)
    }

    /// Adds `expr <= rhs`, folding the constant of `expr` into the right-hand side.
    pub fn add_le(&mut self, expr: LinearExpr, rhs: f64, label: impl Into<String>) -> usize {
        let rhs = rhs - expr.constant;
        let lhs = LinearExpr {
            coefficients: expr.coefficients,
            constant: 0.0,
        };
        self.instance.constraints.push(Constraint {
            lhs,
            rhs,
            label: label.into(),
        });
        self.instance.constraints.len() - 1
    }

    /// Adds `expr >= rhs`.
    pub fn add_ge(&mut self, expr: LinearExpr, rhs: f64, label: impl Into<String>) -> usize {
        self.add_le(-expr, -rhs, label)
    }

    pub fn set_objective(&mut self, objective: LinearExpr) {
        self.instance.objective = objective;
    }

    pub fn var(&self, index: usize) -> &VarInfo {
        &self.instance.vars[index]
    }

    pub fn range(&self, expr: &LinearExpr) -> Result<(f64, f64), CompileError> {
        self.instance.range(expr)
    }

    pub fn num_vars(&self) -> usize {
        self.instance.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.instance.constraints.len()
    }

    pub fn instance(&self) -> &MilpInstance {
        &self.instance
    }

    pub fn finish(self) -> MilpInstance {
        self.instance
    }
}
