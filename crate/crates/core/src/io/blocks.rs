//! Block annotation files (`.blk`).
//!
//! ```text
//! NBLOCKS 2
//! ROW r1 1
//! ROW cap L
//! COL x 0
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_text, IoError};
use crate::model::{BlockAssignment, LpProblem, RowOwner};

pub fn read_blocks(path: &Path, lp: &LpProblem) -> Result<BlockAssignment, IoError> {
    parse_blocks(&read_text(path)?, lp)
}

pub fn parse_blocks(text: &str, lp: &LpProblem) -> Result<BlockAssignment, IoError> {
    let rows: HashMap<&str, usize> = (0..lp.n_rows()).map(|id| (lp.row_name(id), id)).collect();
    let cols: HashMap<&str, usize> = lp.vars.iter().enumerate().map(|(j, v)| (v.name.as_str(), j)).collect();
    let mut n_blocks: Option<usize> = None;
    let mut row_tag: Vec<Option<RowOwner>> = vec![None; lp.n_rows()];
    let mut col_tag: Vec<Option<usize>> = vec![None; lp.n_cols()];

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() || tokens[0].starts_with('#') {
            continue;
        }
        let Some(n) = n_blocks else {
            match tokens[..] {
                ["NBLOCKS", n] => {
                    let n: usize = n.parse().map_err(|_| IoError::parse(line, format!("bad block count '{n}'")))?;
                    if n == 0 {
                        return Err(IoError::parse(line, "NBLOCKS must be at least 1"));
                    }
                    n_blocks = Some(n);
                    continue;
                }
                _ => return Err(IoError::parse(line, "expected 'NBLOCKS <N>' header")),
            }
        };
        let [kind, name, tag] = tokens[..] else {
            return Err(IoError::parse(line, "expected 'ROW <name> <tag>' or 'COL <name> <tag>'"));
        };
        match kind {
            "ROW" => {
                let id = *rows.get(name).ok_or_else(|| IoError::parse(line, format!("unknown row '{name}'")))?;
                let owner = if tag == "L" {
                    RowOwner::Link
                } else {
                    RowOwner::Block(block_tag(tag, n, line)?)
                };
                if row_tag[id].replace(owner).is_some() {
                    return Err(IoError::parse(line, format!("row '{name}' annotated twice")));
                }
            }
            "COL" => {
                let j = *cols.get(name).ok_or_else(|| IoError::parse(line, format!("unknown column '{name}'")))?;
                if col_tag[j].replace(block_tag(tag, n, line)?).is_some() {
                    return Err(IoError::parse(line, format!("column '{name}' annotated twice")));
                }
            }
            other => return Err(IoError::parse(line, format!("unknown record '{other}'"))),
        }
    }

    let n_blocks = n_blocks.ok_or_else(|| IoError::Annotation("missing NBLOCKS header".into()))?;
    let missing: Vec<&str> = (0..lp.n_rows())
        .filter(|&id| row_tag[id].is_none())
        .map(|id| lp.row_name(id))
        .chain(lp.vars.iter().zip(&col_tag).filter(|(_, t)| t.is_none()).map(|(v, _)| v.name.as_str()))
        .collect();
    if !missing.is_empty() {
        return Err(IoError::Annotation(format!("unannotated: {}", missing.join(", "))));
    }
    let row_tag: Vec<RowOwner> = row_tag.into_iter().map(Option::unwrap).collect();
    let a = BlockAssignment {
        n_blocks,
        eq_rows: row_tag[..lp.n_eq()].to_vec(),
        ineq_rows: row_tag[lp.n_eq()..].to_vec(),
        cols: col_tag.into_iter().map(Option::unwrap).collect(),
    };
    let bad = structure_violations(lp, &a);
    if bad.is_empty() {
        Ok(a)
    } else {
        Err(IoError::Structure(bad))
    }
}

fn block_tag(tag: &str, n: usize, line: usize) -> Result<usize, IoError> {
    match tag.parse::<usize>() {
        Ok(b) if b <= n => Ok(b),
        _ => Err(IoError::parse(line, format!("tag '{tag}' outside 0..={n}"))),
    }
}

/// `(row, col)` pairs where a row of block `i` touches a column of block `j`,
/// with `j` neither `i` nor 0.
pub(crate) fn structure_violations(lp: &LpProblem, a: &BlockAssignment) -> Vec<String> {
    let mut out = Vec::new();
    for id in 0..lp.n_rows() {
        let owner = if id < lp.n_eq() { a.eq_rows[id] } else { a.ineq_rows[id - lp.n_eq()] };
        let RowOwner::Block(b) = owner else { continue };
        for (j, _) in lp.row(id) {
            let cb = a.cols[j];
            if cb != 0 && cb != b {
                out.push(format!("({}, {}): row of block {b} touches column of block {cb}", lp.row_name(id), lp.vars[j].name));
            }
        }
    }
    out
}

pub fn write_blocks(lp: &LpProblem, a: &BlockAssignment, path: &Path) -> Result<(), IoError> {
    write_text(path, &render_blocks(lp, a))
}

pub fn render_blocks(lp: &LpProblem, a: &BlockAssignment) -> String {
    let mut out = format!("NBLOCKS {}\n", a.n_blocks);
    for (id, owner) in a.eq_rows.iter().chain(&a.ineq_rows).enumerate() {
        let tag = match owner {
            RowOwner::Link => "L".to_string(),
            RowOwner::Block(b) => b.to_string(),
        };
        let _ = writeln!(out, "ROW {} {tag}", lp.row_name(id));
    }
    for (v, b) in lp.vars.iter().zip(&a.cols) {
        let _ = writeln!(out, "COL {} {b}", v.name);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_mps;

    fn lp() -> LpProblem {
        parse_mps(
            "NAME t\nROWS\n N obj\n E r1\n E r2\n L cap\nCOLUMNS\n x0 cap 1\n x1 r1 1 cap 1\n x2 r2 1 cap 1\n\
             RHS\n RHS r1 1 r2 1 cap 5\nENDATA\n",
        )
        .unwrap()
    }

    #[test]
    fn consistent_annotation_is_accepted() {
        let text = "NBLOCKS 2\nROW r1 1\nROW r2 2\nROW cap L\nCOL x0 0\nCOL x1 1\nCOL x2 2\n";
        let a = parse_blocks(text, &lp()).unwrap();
        assert_eq!(a.eq_rows, vec![RowOwner::Block(1), RowOwner::Block(2)]);
        assert_eq!(a.ineq_rows, vec![RowOwner::Link]);
        assert_eq!(a.cols, vec![0, 1, 2]);
        assert_eq!(render_blocks(&lp(), &a), text);
    }

    #[test]
    fn cross_block_reference_names_the_pair() {
        let text = "NBLOCKS 2\nROW r1 1\nROW r2 2\nROW cap L\nCOL x0 0\nCOL x1 1\nCOL x2 1\n";
        match parse_blocks(text, &lp()) {
            Err(IoError::Structure(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].starts_with("(r2, x2)"), "{}", v[0]);
            }
            other => panic!("expected structure error, got {other:?}"),
        }
    }

    #[test]
    fn annotation_errors() {
        let l = lp();
        assert!(matches!(parse_blocks("ROW r1 1\n", &l), Err(IoError::Parse { line: 1, .. })));
        let dup = "NBLOCKS 2\nROW r1 1\nROW r1 1\n";
        assert!(matches!(parse_blocks(dup, &l), Err(IoError::Parse { line: 3, .. })));
        let range = "NBLOCKS 2\nROW r1 3\n";
        assert!(matches!(parse_blocks(range, &l), Err(IoError::Parse { line: 2, .. })));
        let missing = "NBLOCKS 2\nROW r1 1\nROW r2 2\nCOL x0 0\nCOL x1 1\nCOL x2 2\n";
        assert!(matches!(parse_blocks(missing, &l), Err(IoError::Annotation(m)) if m.contains("cap")));
    }
}
