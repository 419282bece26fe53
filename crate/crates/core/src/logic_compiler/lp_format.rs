//! Plain-text interchange of [`MilpInstance`]s in the CPLEX LP layout.
//!
//! The writer emits every variable in the `Bounds` section in index order, so
//! reading a written file reproduces the variable order, names, kinds, boxes,
//! rows and objective. Symbol tags are not part of the format and read back as
//! [`Symbol::Other`]. Numbers use the shortest representation that parses
//! back to the same `f64`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::model::{Constraint, LinearExpr, MilpInstance, Symbol, VarInfo, VarKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpFormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, expr: &LinearExpr, vars: &[VarInfo]) {
    let mut any = false;
    for (j, c) in expr.terms() {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), vars[j].name);
        any = true;
    }
    if expr.constant != 0.0 || !any {
        let sign = if expr.constant < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", fmt_num(expr.constant.abs()));
    }
}

/// Serializes `instance`; row labels and variable names are used verbatim.
pub fn write_lp(instance: &MilpInstance) -> String {
    let vars = &instance.vars;
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, &instance.objective, vars);
    out.push_str("\nSubject To\n");
    for (k, c) in instance.constraints.iter().enumerate() {
        let label = if c.label.is_empty() {
            format!("r{k}")
        } else {
            c.label.clone()
        };
        let _ = write!(out, " {label}:");
        write_terms(&mut out, &c.lhs, vars);
        let _ = writeln!(out, " <= {}", fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in vars {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(
                out,
                " {} <= {} <= {}",
                fmt_num(v.lower),
                v.name,
                fmt_num(v.upper)
            );
        }
    }
    for (header, kind) in [("General", VarKind::Integer), ("Binary", VarKind::Binary)] {
        let names: Vec<&str> = vars
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.name.as_str())
            .collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{header}");
            for name in names {
                let _ = writeln!(out, " {name}");
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Objective,
    Rows,
    Bounds,
    General,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
        "bounds" => Some(Section::Bounds),
        "general" | "generals" | "gen" => Some(Section::General),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Reader {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Reader {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    let t = tok.strip_prefix('+').unwrap_or(tok);
    t.parse::<f64>().ok()
}

fn is_name(tok: &str) -> bool {
    tok.chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || "_!\"#$%&()/,;?@'`{}|~".contains(c))
        && parse_num(tok).is_none()
}

/// Parses `[+|-] [coef] [name] ...` into terms over interned names.
fn parse_terms(
    text: &str,
    reader: &mut Reader,
    line: usize,
) -> Result<(Vec<(usize, f64)>, f64), LpFormatError> {
    let err = |message: String| LpFormatError::Syntax { line, message };
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut pending = false;
    for raw in text.split_whitespace() {
        let mut tok = raw;
        if tok == "+" || tok == "-" {
            if coef.is_some() {
                constant += sign * coef.take().unwrap();
            }
            sign = if tok == "-" { -1.0 } else { 1.0 };
            pending = true;
            continue;
        }
        if coef.is_none() && !pending && !terms.is_empty() {
            return Err(err(format!("missing operator before `{raw}`")));
        }
        if let Some(rest) = tok.strip_prefix('-').filter(|r| is_name(r)) {
            sign = -sign;
            tok = rest;
        }
        if let Some(x) = parse_num(tok) {
            if coef.is_some() {
                return Err(err(format!("two numbers in a row at `{raw}`")));
            }
            coef = Some(x);
        } else if is_name(tok) {
            let j = reader.intern(tok);
            terms.push((j, sign * coef.take().unwrap_or(1.0)));
            sign = 1.0;
            pending = false;
        } else {
            return Err(err(format!("unexpected token `{raw}`")));
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

fn split_label(text: &str) -> (Option<&str>, &str) {
    match text.find(':') {
        Some(p) => (Some(text[..p].trim()), &text[p + 1..]),
        None => (None, text),
    }
}

type Terms = Vec<(usize, f64)>;

/// Parses text produced by [`write_lp`], plus the common variants of the
/// layout (`>=` and `=` rows, `free` and one-sided bounds, omitted bounds).
pub fn read_lp(text: &str) -> Result<MilpInstance, LpFormatError> {
    let mut reader = Reader {
        names: Vec::new(),
        index: HashMap::new(),
    };
    let mut section = Section::None;
    let mut objective: Option<(Vec<(usize, f64)>, f64)> = None;
    let mut rows: Vec<(String, Terms, f64)> = Vec::new();
    let mut bounds_order: Vec<usize> = Vec::new();
    let mut bounds: HashMap<usize, (Option<f64>, Option<f64>)> = HashMap::new();
    let mut kinds: HashMap<usize, VarKind> = HashMap::new();
    let mut objective_text = String::new();
    let mut objective_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            section = s;
            continue;
        }
        let err = |message: String| LpFormatError::Syntax {
            line: line_no,
            message,
        };
        match section {
            Section::None => return Err(err("content before `Minimize`".into())),
            Section::End => return Err(err("content after `End`".into())),
            Section::Objective => {
                if objective_text.is_empty() {
                    objective_line = line_no;
                }
                objective_text.push(' ');
                objective_text.push_str(line);
            }
            Section::Rows => {
                let (label, body) = split_label(line);
                let label = label
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("r{}", rows.len()));
                let (op, pos) = ["<=", ">=", "=<", "=>", "="]
                    .iter()
                    .find_map(|op| body.find(op).map(|p| (*op, p)))
                    .ok_or_else(|| err("row without comparison".into()))?;
                let rhs = parse_num(body[pos + op.len()..].trim())
                    .ok_or_else(|| err("right-hand side is not a number".into()))?;
                let (terms, constant) = parse_terms(&body[..pos], &mut reader, line_no)?;
                let rhs = rhs - constant;
                let negate =
                    |t: &[(usize, f64)]| t.iter().map(|&(j, c)| (j, -c)).collect::<Vec<_>>();
                match op {
                    "<=" | "=<" => rows.push((label, terms, rhs)),
                    ">=" | "=>" => rows.push((label, negate(&terms), -rhs)),
                    _ => {
                        rows.push((format!("{label}_hi"), terms.clone(), rhs));
                        rows.push((format!("{label}_lo"), negate(&terms), -rhs));
                    }
                }
            }
            Section::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let mut set = |name: &str, lo: Option<f64>, hi: Option<f64>| {
                    let j = reader.intern(name);
                    if !bounds.contains_key(&j) {
                        bounds_order.push(j);
                    }
                    let entry = bounds.entry(j).or_insert((None, None));
                    if lo.is_some() {
                        entry.0 = lo;
                    }
                    if hi.is_some() {
                        entry.1 = hi;
                    }
                };
                let num = |t: &str| parse_num(t).ok_or_else(|| err(format!("bad number `{t}`")));
                match toks.as_slice() {
                    [name, free] if free.eq_ignore_ascii_case("free") => {
                        set(name, Some(f64::NEG_INFINITY), Some(f64::INFINITY))
                    }
                    [lo, "<=", name, "<=", hi] => set(name, Some(num(lo)?), Some(num(hi)?)),
                    [lo, "<=", name] if parse_num(lo).is_some() => set(name, Some(num(lo)?), None),
                    [name, "<=", hi] => set(name, None, Some(num(hi)?)),
                    [name, ">=", lo] => set(name, Some(num(lo)?), None),
                    [name, "=", x] => {
                        let x = num(x)?;
                        set(name, Some(x), Some(x))
                    }
                    _ => return Err(err(format!("unrecognized bound `{line}`"))),
                }
            }
            Section::General | Section::Binary => {
                let kind = if section == Section::General {
                    VarKind::Integer
                } else {
                    VarKind::Binary
                };
                for name in line.split_whitespace() {
                    let j = reader.intern(name);
                    kinds.insert(j, kind);
                }
            }
        }
    }
    if section != Section::End {
        return Err(LpFormatError::MissingSection("End"));
    }
    if !objective_text.is_empty() {
        let (_, body) = split_label(objective_text.trim());
        objective = Some(parse_terms(body, &mut reader, objective_line)?);
    }
    let (obj_terms, obj_const) = objective.ok_or(LpFormatError::MissingSection("Minimize"))?;

    // Variables listed in `Bounds` come first, in that order.
    let mut order = bounds_order.clone();
    let mut seen = vec![false; reader.names.len()];
    for &j in &order {
        seen[j] = true;
    }
    order.extend((0..reader.names.len()).filter(|&j| !seen[j]));
    let mut remap = vec![0; reader.names.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }

    let vars = order
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let kind = kinds.get(&old).copied().unwrap_or(VarKind::Continuous);
            let (lo, hi) = bounds.get(&old).copied().unwrap_or((None, None));
            let (dlo, dhi) = if kind == VarKind::Binary {
                (0.0, 1.0)
            } else {
                (0.0, f64::INFINITY)
            };
            VarInfo {
                index: new,
                name: reader.names[old].clone(),
                kind,
                lower: lo.unwrap_or(dlo),
                upper: hi.unwrap_or(dhi),
                symbol: Symbol::Other,
                neighbor: None,
                step: None,
            }
        })
        .collect();
    let build = |terms: &[(usize, f64)], constant: f64| {
        let mut e = LinearExpr::constant(constant);
        for &(j, c) in terms {
            e.add_term(remap[j], c);
        }
        e
    };
    Ok(MilpInstance {
        objective: build(&obj_terms, obj_const),
        constraints: rows
            .iter()
            .map(|(label, terms, rhs)| Constraint {
                lhs: build(terms, 0.0),
                rhs: *rhs,
                label: label.clone(),
            })
            .collect(),
        vars,
    })
}
