//! Free-form MPS.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{fmt_num, parse_num, read_text, write_text, IoError};
use crate::model::{LpProblem, SparseMatrix, VarData};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowRef {
    Objective,
    /// Extra `N` rows are free and carry no information.
    Dropped,
    Row(usize),
}

struct RowDef {
    name: String,
    kind: char,
    rhs: f64,
    range: Option<f64>,
    entries: Vec<(usize, f64)>,
}

struct ColDef {
    var: VarData,
    lower_set: bool,
    upper_set: bool,
}

#[derive(Default)]
struct Parser {
    name: String,
    section: Option<Section>,
    rows: Vec<RowDef>,
    row_index: HashMap<String, RowRef>,
    objective: Option<String>,
    cols: Vec<ColDef>,
    col_index: HashMap<String, usize>,
    seen_entries: HashSet<(usize, usize)>,
    seen_costs: HashSet<usize>,
    rhs_set: HashSet<usize>,
    offset: Option<f64>,
    ranges_set: HashSet<usize>,
    done: bool,
}

pub fn read_mps(path: &Path) -> Result<LpProblem, IoError> {
    parse_mps(&read_text(path)?)
}

pub fn parse_mps(text: &str) -> Result<LpProblem, IoError> {
    let mut p = Parser::default();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if p.done {
            return Err(IoError::parse(line, "content after ENDATA"));
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            p.header(&tokens, raw, line)?;
        } else {
            p.data(&tokens, line)?;
        }
    }
    if !p.done {
        return Err(IoError::parse(text.lines().count(), "missing ENDATA"));
    }
    Ok(p.finish())
}

impl Parser {
    fn header(&mut self, tokens: &[&str], raw: &str, line: usize) -> Result<(), IoError> {
        let keyword = tokens[0].to_ascii_uppercase();
        self.section = Some(match keyword.as_str() {
            "NAME" => {
                self.name = raw.trim_start()[4..].trim().to_string();
                Section::Name
            }
            "OBJSENSE" => {
                if let Some(sense) = tokens.get(1) {
                    check_sense(sense, line)?;
                }
                Section::ObjSense
            }
            "ROWS" => Section::Rows,
            "COLUMNS" => Section::Columns,
            "RHS" => Section::Rhs,
            "RANGES" => Section::Ranges,
            "BOUNDS" => Section::Bounds,
            "ENDATA" => {
                self.done = true;
                self.section = None;
                return Ok(());
            }
            other => return Err(IoError::parse(line, format!("unknown section '{other}'"))),
        });
        Ok(())
    }

    fn data(&mut self, tokens: &[&str], line: usize) -> Result<(), IoError> {
        match self.section {
            None | Some(Section::Name) => Err(IoError::parse(line, "data line outside a section")),
            Some(Section::ObjSense) => check_sense(tokens[0], line),
            Some(Section::Rows) => self.row_line(tokens, line),
            Some(Section::Columns) => self.column_line(tokens, line),
            Some(Section::Rhs) => self.rhs_line(tokens, line, false),
            Some(Section::Ranges) => self.rhs_line(tokens, line, true),
            Some(Section::Bounds) => self.bound_line(tokens, line),
        }
    }

    fn row_line(&mut self, tokens: &[&str], line: usize) -> Result<(), IoError> {
        let [kind, name] = tokens else {
            return Err(IoError::parse(line, "ROWS entries are '<kind> <name>'"));
        };
        if self.row_index.contains_key(*name) {
            return Err(IoError::parse(line, format!("duplicate row '{name}'")));
        }
        let kind = match kind.to_ascii_uppercase().as_str() {
            "N" => None,
            "E" => Some('E'),
            "L" => Some('L'),
            "G" => Some('G'),
            other => return Err(IoError::parse(line, format!("unknown row kind '{other}'"))),
        };
        let r = match kind {
            None if self.objective.is_none() => {
                self.objective = Some(name.to_string());
                RowRef::Objective
            }
            None => RowRef::Dropped,
            Some(kind) => {
                self.rows.push(RowDef { name: name.to_string(), kind, rhs: 0.0, range: None, entries: Vec::new() });
                RowRef::Row(self.rows.len() - 1)
            }
        };
        self.row_index.insert(name.to_string(), r);
        Ok(())
    }

    fn row_ref(&self, name: &str, line: usize) -> Result<RowRef, IoError> {
        self.row_index.get(name).copied().ok_or_else(|| IoError::parse(line, format!("unknown row '{name}'")))
    }

    fn col_ref(&self, name: &str, line: usize) -> Result<usize, IoError> {
        self.col_index.get(name).copied().ok_or_else(|| IoError::parse(line, format!("unknown column '{name}'")))
    }

    fn column_line(&mut self, tokens: &[&str], line: usize) -> Result<(), IoError> {
        if tokens.len() >= 2 && tokens[1].eq_ignore_ascii_case("'MARKER'") {
            // Integrality markers; the LP relaxation ignores them.
            return Ok(());
        }
        if tokens.len() < 3 || tokens.len() % 2 == 0 {
            return Err(IoError::parse(line, "COLUMNS entries are '<col> <row> <value> ...'"));
        }
        let name = tokens[0];
        let j = match self.col_index.get(name) {
            Some(&j) => j,
            None => {
                self.cols.push(ColDef {
                    var: VarData::new(name, 0.0, f64::INFINITY, 0.0),
                    lower_set: false,
                    upper_set: false,
                });
                self.col_index.insert(name.to_string(), self.cols.len() - 1);
                self.cols.len() - 1
            }
        };
        for pair in tokens[1..].chunks(2) {
            let v = parse_num(pair[1], line)?;
            if !v.is_finite() {
                return Err(IoError::parse(line, "matrix coefficients must be finite"));
            }
            match self.row_ref(pair[0], line)? {
                RowRef::Objective => {
                    if !self.seen_costs.insert(j) {
                        return Err(IoError::parse(line, format!("duplicate objective entry for column '{name}'")));
                    }
                    self.cols[j].var.cost = v;
                }
                RowRef::Dropped => {}
                RowRef::Row(i) => {
                    if !self.seen_entries.insert((i, j)) {
                        return Err(IoError::parse(line, format!("duplicate entry ({}, {name})", pair[0])));
                    }
                    self.rows[i].entries.push((j, v));
                }
            }
        }
        Ok(())
    }

    /// `[<set>] <row> <value> ...`, for RHS and RANGES alike. Free form
    /// allows any number of pairs per line.
    fn rhs_line(&mut self, tokens: &[&str], line: usize, ranges: bool) -> Result<(), IoError> {
        let pairs = match tokens.len() {
            0 | 1 => return Err(IoError::parse(line, "expected '[<set>] <row> <value> ...'")),
            n if n % 2 == 0 => tokens,
            _ => &tokens[1..],
        };
        for pair in pairs.chunks(2) {
            let v = parse_num(pair[1], line)?;
            match (self.row_ref(pair[0], line)?, ranges) {
                (RowRef::Objective, false) => {
                    if self.offset.replace(-v).is_some() {
                        return Err(IoError::parse(line, "duplicate objective right-hand side"));
                    }
                }
                (RowRef::Dropped, false) => {}
                (RowRef::Objective | RowRef::Dropped, true) => {
                    return Err(IoError::parse(line, format!("range on objective row '{}'", pair[0])));
                }
                (RowRef::Row(i), false) => {
                    if !self.rhs_set.insert(i) {
                        return Err(IoError::parse(line, format!("duplicate right-hand side for '{}'", pair[0])));
                    }
                    self.rows[i].rhs = v;
                }
                (RowRef::Row(i), true) => {
                    if !self.ranges_set.insert(i) {
                        return Err(IoError::parse(line, format!("duplicate range for '{}'", pair[0])));
                    }
                    self.rows[i].range = Some(v);
                }
            }
        }
        Ok(())
    }

    /// `<type> [<set>] <col> [<value>]`.
    fn bound_line(&mut self, tokens: &[&str], line: usize) -> Result<(), IoError> {
        let kind = tokens[0].to_ascii_uppercase();
        let valued = !matches!(kind.as_str(), "FR" | "MI" | "PL" | "BV");
        let (col, value) = match (valued, tokens.len()) {
            (true, 3) => (tokens[1], Some(tokens[2])),
            (true, 4) => (tokens[2], Some(tokens[3])),
            (false, 2) => (tokens[1], None),
            (false, 3) => (tokens[2], None),
            // BV occasionally carries a redundant value.
            (false, 4) if kind == "BV" => (tokens[2], None),
            _ => return Err(IoError::parse(line, format!("malformed {kind} bound"))),
        };
        let j = self.col_ref(col, line)?;
        let v = value.map(|s| parse_num(s, line)).transpose()?;
        let c = &mut self.cols[j];
        let (set_lower, set_upper) = match kind.as_str() {
            "UP" | "UI" => (false, true),
            "LO" | "LI" => (true, false),
            "FX" | "FR" | "BV" => (true, true),
            "MI" => (true, false),
            "PL" => (false, true),
            other => return Err(IoError::parse(line, format!("unknown bound type '{other}'"))),
        };
        if (set_lower && c.lower_set) || (set_upper && c.upper_set) {
            return Err(IoError::parse(line, format!("duplicate bound for column '{col}'")));
        }
        match (kind.as_str(), v) {
            ("UP" | "UI", Some(v)) => {
                // Classic convention: a negative upper bound with no explicit
                // lower bound makes the column free below.
                if v < 0.0 && !c.lower_set {
                    c.var.lower = f64::NEG_INFINITY;
                }
                c.var.upper = v;
            }
            ("LO" | "LI", Some(v)) => c.var.lower = v,
            ("FX", Some(v)) => {
                if !v.is_finite() {
                    return Err(IoError::parse(line, "infinite fixed value"));
                }
                c.var.lower = v;
                c.var.upper = v;
            }
            ("FR", None) => {
                c.var.lower = f64::NEG_INFINITY;
                c.var.upper = f64::INFINITY;
            }
            ("MI", None) => c.var.lower = f64::NEG_INFINITY,
            ("PL", None) => c.var.upper = f64::INFINITY,
            ("BV", None) => {
                c.var.lower = 0.0;
                c.var.upper = 1.0;
            }
            _ => unreachable!("value presence checked above"),
        }
        c.lower_set |= set_lower;
        c.upper_set |= set_upper;
        Ok(())
    }

    fn finish(self) -> LpProblem {
        let ncols = self.cols.len();
        let mut eq_rows = Vec::new();
        let mut ineq_rows = Vec::new();
        let mut lp = LpProblem { name: self.name, obj_offset: self.offset.unwrap_or(0.0), ..Default::default() };
        for r in self.rows {
            let b = r.rhs;
            let bounds = match (r.kind, r.range) {
                ('E', None) => None,
                ('E', Some(q)) if q < 0.0 => Some((b + q, b)),
                ('E', Some(q)) => Some((b, b + q)),
                ('L', None) => Some((f64::NEG_INFINITY, b)),
                ('L', Some(q)) => Some((b - q.abs(), b)),
                ('G', None) => Some((b, f64::INFINITY)),
                ('G', Some(q)) => Some((b, b + q.abs())),
                _ => unreachable!("row kinds are validated on input"),
            };
            match bounds {
                None => {
                    eq_rows.push(r.entries);
                    lp.eq_rhs.push(b);
                    lp.eq_names.push(r.name);
                }
                Some((lo, up)) => {
                    ineq_rows.push(r.entries);
                    lp.ineq_lower.push(lo);
                    lp.ineq_upper.push(up);
                    lp.ineq_names.push(r.name);
                }
            }
        }
        lp.eq = SparseMatrix::from_rows(ncols, eq_rows);
        lp.ineq = SparseMatrix::from_rows(ncols, ineq_rows);
        lp.vars = self.cols.into_iter().map(|c| c.var).collect();
        lp
    }
}

fn check_sense(sense: &str, line: usize) -> Result<(), IoError> {
    match sense.to_ascii_uppercase().as_str() {
        "MIN" | "MINIMIZE" => Ok(()),
        "MAX" | "MAXIMIZE" => Err(IoError::parse(line, "maximization is not supported")),
        other => Err(IoError::parse(line, format!("unknown objective sense '{other}'"))),
    }
}

pub fn write_mps(lp: &LpProblem, path: &Path) -> Result<(), IoError> {
    write_text(path, &render_mps(lp))
}

/// Row encoding for an inequality row: kind, rhs and optional range, picked
/// so that reading it back reproduces both sides exactly when possible.
fn ineq_encoding(lo: f64, up: f64) -> (char, f64, Option<f64>) {
    match (lo.is_finite(), up.is_finite()) {
        (false, false) => ('G', f64::NEG_INFINITY, None),
        (true, false) => ('G', lo, None),
        (false, true) => ('L', up, None),
        (true, true) if lo == up => ('E', lo, Some(0.0)),
        (true, true) => {
            let r = up - lo;
            if up - r == lo || lo + r != up {
                ('L', up, Some(r))
            } else {
                ('G', lo, Some(r))
            }
        }
    }
}

/// Free-form MPS. Names must not contain whitespace.
pub fn render_mps(lp: &LpProblem) -> String {
    let mut out = String::new();
    let mut obj = "obj".to_string();
    let taken: HashSet<&str> = lp.eq_names.iter().chain(&lp.ineq_names).map(String::as_str).collect();
    let mut k = 1;
    while taken.contains(obj.as_str()) {
        obj = format!("obj_{k}");
        k += 1;
    }

    let _ = writeln!(out, "NAME {}", lp.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {obj}");
    let enc: Vec<(char, f64, Option<f64>)> =
        (0..lp.n_ineq()).map(|i| ineq_encoding(lp.ineq_lower[i], lp.ineq_upper[i])).collect();
    for name in &lp.eq_names {
        let _ = writeln!(out, " E {name}");
    }
    for (name, e) in lp.ineq_names.iter().zip(&enc) {
        let _ = writeln!(out, " {} {name}", e.0);
    }

    out.push_str("COLUMNS\n");
    let cols = lp.columns();
    for (j, v) in lp.vars.iter().enumerate() {
        if v.cost != 0.0 || cols[j].is_empty() {
            let _ = writeln!(out, " {} {obj} {}", v.name, fmt_num(v.cost));
        }
        for &(id, a) in &cols[j] {
            let _ = writeln!(out, " {} {} {}", v.name, lp.row_name(id), fmt_num(a));
        }
    }

    out.push_str("RHS\n");
    if lp.obj_offset != 0.0 {
        let _ = writeln!(out, " RHS {obj} {}", fmt_num(-lp.obj_offset));
    }
    for (name, b) in lp.eq_names.iter().zip(&lp.eq_rhs) {
        if *b != 0.0 {
            let _ = writeln!(out, " RHS {name} {}", fmt_num(*b));
        }
    }
    for (name, e) in lp.ineq_names.iter().zip(&enc) {
        if e.1 != 0.0 {
            let _ = writeln!(out, " RHS {name} {}", fmt_num(e.1));
        }
    }

    if enc.iter().any(|e| e.2.is_some()) {
        out.push_str("RANGES\n");
        for (name, e) in lp.ineq_names.iter().zip(&enc) {
            if let Some(r) = e.2 {
                let _ = writeln!(out, " RNG {name} {}", fmt_num(r));
            }
        }
    }

    out.push_str("BOUNDS\n");
    for v in &lp.vars {
        let n = &v.name;
        match (v.lower, v.upper) {
            (lo, up) if lo == up => {
                let _ = writeln!(out, " FX BND {n} {}", fmt_num(lo));
            }
            (lo, up) if lo == f64::NEG_INFINITY && up == f64::INFINITY => {
                let _ = writeln!(out, " FR BND {n}");
            }
            (lo, up) => {
                if lo == f64::NEG_INFINITY {
                    let _ = writeln!(out, " MI BND {n}");
                } else if lo != 0.0 || up < 0.0 {
                    let _ = writeln!(out, " LO BND {n} {}", fmt_num(lo));
                }
                if up != f64::INFINITY {
                    let _ = writeln!(out, " UP BND {n} {}", fmt_num(up));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_line(text: &str) -> usize {
        match parse_mps(text) {
            Err(IoError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_problem() {
        let lp = parse_mps("NAME tiny\nROWS\n N obj\n L c1\nCOLUMNS\n x obj 1 c1 2\nRHS\n RHS c1 4\nENDATA\n").unwrap();
        assert_eq!(lp.name, "tiny");
        assert_eq!((lp.n_eq(), lp.n_ineq(), lp.n_cols()), (0, 1, 1));
        assert_eq!(lp.ineq.get(0, 0), 2.0);
        assert_eq!((lp.ineq_lower[0], lp.ineq_upper[0]), (f64::NEG_INFINITY, 4.0));
        assert_eq!((lp.vars[0].lower, lp.vars[0].upper, lp.vars[0].cost), (0.0, f64::INFINITY, 1.0));
    }

    #[test]
    fn ranges_follow_the_mps_convention() {
        let text = "NAME r\nROWS\n N obj\n L l\n G g\n E ep\n E en\nCOLUMNS\n x l 1 g 1\n x ep 1 en 1\n\
                    RHS\n RHS l 10 g 2\n RHS ep 5 en 5\nRANGES\n RNG l -3 g 4\n RNG ep 2 en -2\nENDATA\n";
        let lp = parse_mps(text).unwrap();
        assert_eq!(lp.n_eq(), 0);
        let b: Vec<(f64, f64)> = (0..4).map(|i| (lp.ineq_lower[i], lp.ineq_upper[i])).collect();
        assert_eq!(b, vec![(7.0, 10.0), (2.0, 6.0), (5.0, 7.0), (3.0, 5.0)]);
    }

    #[test]
    fn objective_rhs_is_negated_offset_and_extra_free_rows_vanish() {
        let text = "NAME o\nROWS\n N obj\n N spare\n E e\nCOLUMNS\n x obj 1 spare 3\n x e 1\nRHS\n RHS obj 2.5 e 1\nENDATA\n";
        let lp = parse_mps(text).unwrap();
        assert_eq!(lp.obj_offset, -2.5);
        assert_eq!(lp.n_rows(), 1);
    }

    #[test]
    fn bound_types() {
        let text = "NAME b\nROWS\n N obj\nCOLUMNS\n a obj 1\n b obj 1\n c obj 1\n d obj 1\n e obj 1\n f obj 1\n\
                    BOUNDS\n UP BND a -2\n FX BND b 3\n FR BND c\n MI BND d\n UP BND d 4\n BV BND e\n LO BND f 1\n PL BND f\nENDATA\n";
        let lp = parse_mps(text).unwrap();
        let b: Vec<(f64, f64)> = lp.vars.iter().map(|v| (v.lower, v.upper)).collect();
        let inf = f64::INFINITY;
        assert_eq!(b, vec![(-inf, -2.0), (3.0, 3.0), (-inf, inf), (-inf, 4.0), (0.0, 1.0), (1.0, inf)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(err_line("NAME x\nROWS\n N obj\nFOO\nENDATA\n"), 4);
        assert_eq!(err_line("NAME x\nROWS\n N obj\n E r\n E r\nENDATA\n"), 5);
        assert_eq!(err_line("NAME x\nROWS\n E r\nCOLUMNS\n x r 1\n x r 2\nENDATA\n"), 6);
        assert_eq!(err_line("NAME x\nROWS\n E r\nCOLUMNS\n x q 1\nENDATA\n"), 5);
        assert_eq!(err_line("NAME x\nROWS\n E r\nCOLUMNS\n x r 1\nBOUNDS\n UP BND y 1\nENDATA\n"), 7);
        assert_eq!(err_line("NAME x\nROWS\n E r\nCOLUMNS\n x r 1\nBOUNDS\n UP BND x 1\n UP BND x 2\nENDATA\n"), 8);
        assert_eq!(err_line("NAME x\nOBJSENSE\n MAX\nROWS\nENDATA\n"), 3);
        assert_eq!(err_line("NAME x\nROWS\n E r\n"), 3);
    }

    #[test]
    fn infinite_and_ranged_rows_survive_a_round_trip() {
        let inf = f64::INFINITY;
        let lp = LpProblem {
            name: "rt".into(),
            vars: vec![VarData::new("x", -inf, 2.0, 1.5), VarData::new("y", 0.0, 0.0, 0.0), VarData::new("z", -1.0, inf, 0.0)],
            eq: SparseMatrix::from_rows(3, vec![vec![(0, 1.0), (2, -0.25)]]),
            eq_rhs: vec![3.0],
            eq_names: vec!["e".into()],
            ineq: SparseMatrix::from_rows(3, vec![vec![(0, 1e-7)], vec![(2, 4.0)], vec![(0, 2.0)], vec![]]),
            ineq_lower: vec![-inf, 0.1, 5.0, -inf],
            ineq_upper: vec![inf, 1e20, 5.0, 7.0],
            ineq_names: vec!["free".into(), "obj".into(), "pin".into(), "empty".into()],
            obj_offset: 0.75,
        };
        let back = parse_mps(&render_mps(&lp)).unwrap();
        assert_eq!(back, lp);
    }
}
