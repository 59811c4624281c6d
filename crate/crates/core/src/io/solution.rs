//! Primal-dual solution text files.
//!
//! ```text
//! *PRIMAL
//! x 1.5
//! *EQ_DUALS
//! r1 -0.25
//! *INEQ_DUALS
//! cap 0
//! *BOUND_DUALS
//! x 0 0
//! ```
//!
//! Bound dual lines carry `gamma phi` (lower and upper bound duals).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{fmt_num, parse_num, read_text, write_text, IoError};
use crate::model::LpProblem;
use crate::postsolve::PrimalDualSolution;

const SECTIONS: [&str; 4] = ["*PRIMAL", "*EQ_DUALS", "*INEQ_DUALS", "*BOUND_DUALS"];

pub fn render_solution(lp: &LpProblem, s: &PrimalDualSolution) -> String {
    let mut out = String::from("*PRIMAL\n");
    for (v, x) in lp.vars.iter().zip(&s.x) {
        let _ = writeln!(out, "{} {}", v.name, fmt_num(*x));
    }
    out.push_str("*EQ_DUALS\n");
    for (id, name) in lp.eq_names.iter().enumerate() {
        let _ = writeln!(out, "{name} {}", fmt_num(s.y[id]));
    }
    out.push_str("*INEQ_DUALS\n");
    for (k, name) in lp.ineq_names.iter().enumerate() {
        let _ = writeln!(out, "{name} {}", fmt_num(s.y[lp.n_eq() + k]));
    }
    out.push_str("*BOUND_DUALS\n");
    for (j, v) in lp.vars.iter().enumerate() {
        let _ = writeln!(out, "{} {} {}", v.name, fmt_num(s.gamma(j)), fmt_num(s.phi(j)));
    }
    out
}

pub fn write_solution(lp: &LpProblem, s: &PrimalDualSolution, path: &Path) -> Result<(), IoError> {
    write_text(path, &render_solution(lp, s))
}

pub fn read_solution(path: &Path, lp: &LpProblem) -> Result<PrimalDualSolution, IoError> {
    parse_solution(&read_text(path)?, lp)
}

/// Every name must appear exactly once in its section.
pub fn parse_solution(text: &str, lp: &LpProblem) -> Result<PrimalDualSolution, IoError> {
    let cols: HashMap<&str, usize> = lp.vars.iter().enumerate().map(|(j, v)| (v.name.as_str(), j)).collect();
    let eq: HashMap<&str, usize> = lp.eq_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let ineq: HashMap<&str, usize> =
        lp.ineq_names.iter().enumerate().map(|(i, n)| (n.as_str(), lp.n_eq() + i)).collect();
    let mut s = PrimalDualSolution::zeros(lp.id_space());
    let mut seen = [vec![false; lp.n_cols()], vec![false; lp.n_rows()], vec![false; lp.n_cols()]];
    let mut section: Option<usize> = None;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if let Some(p) = SECTIONS.iter().position(|h| *h == tokens[0]) {
            section = Some(p);
            continue;
        }
        let sec = section.ok_or_else(|| IoError::parse(line, "data before the first section"))?;
        let arity = if sec == 3 { 3 } else { 2 };
        if tokens.len() != arity {
            return Err(IoError::parse(line, format!("expected {arity} fields")));
        }
        let name = tokens[0];
        let unknown = || IoError::parse(line, format!("unknown name '{name}'"));
        let (slot, idx) = match sec {
            0 => (0, *cols.get(name).ok_or_else(unknown)?),
            1 => (1, *eq.get(name).ok_or_else(unknown)?),
            2 => (1, *ineq.get(name).ok_or_else(unknown)?),
            _ => (2, *cols.get(name).ok_or_else(unknown)?),
        };
        if std::mem::replace(&mut seen[slot][idx], true) {
            return Err(IoError::parse(line, format!("duplicate entry for '{name}'")));
        }
        let v = parse_num(tokens[1], line)?;
        match sec {
            0 => s.x[idx] = v,
            1 | 2 => s.y[idx] = v,
            _ => s.z[idx] = v - parse_num(tokens[2], line)?,
        }
    }
    if seen.iter().any(|v| v.iter().any(|s| !s)) {
        return Err(IoError::Annotation("solution file does not cover every row and column".into()));
    }
    Ok(s)
}
