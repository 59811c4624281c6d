use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use super::{Block0, BlockProblem, ColGroup, RowGroup, SparseMatrix};
use crate::comm::{Communicator, ReduceOp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSize {
    pub nnz: usize,
    pub rows: usize,
    pub cols: usize,
}

fn check_matrix(out: &mut Vec<String>, what: &str, m: &SparseMatrix, rows: usize, cols: usize) {
    if m.nrows() != rows || m.ncols() != cols {
        out.push(format!("{what}: shape {}x{} but expected {rows}x{cols}", m.nrows(), m.ncols()));
    }
    out.extend(m.check().into_iter().map(|s| format!("{what}: {s}")));
}

fn check_rows(out: &mut Vec<String>, what: &str, g: &RowGroup, eq: bool, p: &BlockProblem) {
    let n = g.ids.len();
    if g.names.len() != n || g.lower.len() != n || g.upper.len() != n {
        out.push(format!("{what}: row data have inconsistent lengths"));
        return;
    }
    for k in 0..n {
        let id = g.ids[k];
        let in_range = if eq { id < p.ids.n_eq } else { id >= p.ids.n_eq && id < p.ids.n_rows() };
        if !in_range {
            out.push(format!("{what}: row id {id} outside its kind's id range"));
        }
        let (lo, up) = (g.lower[k], g.upper[k]);
        if eq && (lo != up || !lo.is_finite()) {
            out.push(format!("{what}: equality row {} has right-hand side [{lo}, {up}]", g.names[k]));
        }
        if !eq && (lo > up || lo == f64::INFINITY || up == f64::NEG_INFINITY || lo.is_nan() || up.is_nan()) {
            out.push(format!("{what}: row {} has inverted bounds [{lo}, {up}]", g.names[k]));
        }
    }
}

fn check_cols(out: &mut Vec<String>, what: &str, g: &ColGroup, p: &BlockProblem) {
    if g.ids.len() != g.vars.len() {
        out.push(format!("{what}: column data have inconsistent lengths"));
        return;
    }
    for (id, v) in g.ids.iter().zip(&g.vars) {
        if *id >= p.ids.n_cols {
            out.push(format!("{what}: column id {id} out of range"));
        }
        if v.lower > v.upper || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY || v.lower.is_nan() || v.upper.is_nan() {
            out.push(format!("{what}: column {} has inverted bounds [{}, {}]", v.name, v.lower, v.upper));
        }
    }
}

/// Violations visible on this slice alone.
pub fn local_violations(p: &BlockProblem) -> Vec<String> {
    let mut out = Vec::new();
    let b0 = &p.block0;
    let n0 = b0.cols.len();
    check_cols(&mut out, "x0", &b0.cols, p);
    check_matrix(&mut out, "A0", &b0.a, b0.eq.len(), n0);
    check_matrix(&mut out, "C0", &b0.c, b0.ineq.len(), n0);
    check_matrix(&mut out, "F0", &b0.f, b0.link_eq.len(), n0);
    check_matrix(&mut out, "G0", &b0.g, b0.link_ineq.len(), n0);
    check_rows(&mut out, "block 0 equalities", &b0.eq, true, p);
    check_rows(&mut out, "block 0 inequalities", &b0.ineq, false, p);
    check_rows(&mut out, "linking equalities", &b0.link_eq, true, p);
    check_rows(&mut out, "linking inequalities", &b0.link_ineq, false, p);
    let mut last = 0;
    for blk in &p.blocks {
        let b = blk.id;
        if b == 0 || b > p.n_blocks || b <= last {
            out.push(format!("block id {b} invalid or out of order"));
        }
        last = b;
        let ni = blk.cols.len();
        check_cols(&mut out, &format!("x{b}"), &blk.cols, p);
        check_matrix(&mut out, &format!("A{b}"), &blk.a, blk.eq.len(), n0);
        check_matrix(&mut out, &format!("B{b}"), &blk.b, blk.eq.len(), ni);
        check_matrix(&mut out, &format!("C{b}"), &blk.c, blk.ineq.len(), n0);
        check_matrix(&mut out, &format!("D{b}"), &blk.d, blk.ineq.len(), ni);
        check_matrix(&mut out, &format!("F{b}"), &blk.f, b0.link_eq.len(), ni);
        check_matrix(&mut out, &format!("G{b}"), &blk.g, b0.link_ineq.len(), ni);
        check_rows(&mut out, &format!("block {b} equalities"), &blk.eq, true, p);
        check_rows(&mut out, &format!("block {b} inequalities"), &blk.ineq, false, p);
    }
    out
}

fn hash_matrix(h: &mut DefaultHasher, m: &SparseMatrix) {
    h.write_usize(m.nrows());
    h.write_usize(m.ncols());
    for i in 0..m.nrows() {
        for (c, v) in m.row(i) {
            h.write_usize(c);
            h.write_u64(v.to_bits());
        }
        h.write_u8(0xff);
    }
}

fn hash_rows(h: &mut DefaultHasher, g: &RowGroup) {
    for k in 0..g.ids.len() {
        h.write_usize(g.ids[k]);
        h.write(g.names[k].as_bytes());
        h.write_u64(g.lower[k].to_bits());
        h.write_u64(g.upper[k].to_bits());
    }
    h.write_u8(0xfe);
}

/// Digest of the data every rank must hold identically.
pub fn replicated_checksum(p: &BlockProblem) -> u64 {
    let b0: &Block0 = &p.block0;
    let mut h = DefaultHasher::new();
    h.write_usize(p.n_blocks);
    h.write_usize(p.ids.n_eq);
    h.write_usize(p.ids.n_ineq);
    h.write_usize(p.ids.n_cols);
    for (id, v) in b0.cols.ids.iter().zip(&b0.cols.vars) {
        h.write_usize(*id);
        h.write(v.name.as_bytes());
        h.write_u64(v.lower.to_bits());
        h.write_u64(v.upper.to_bits());
        h.write_u64(v.cost.to_bits());
    }
    hash_matrix(&mut h, &b0.a);
    hash_matrix(&mut h, &b0.c);
    hash_matrix(&mut h, &b0.f);
    hash_matrix(&mut h, &b0.g);
    hash_rows(&mut h, &b0.eq);
    hash_rows(&mut h, &b0.ineq);
    hash_rows(&mut h, &b0.link_eq);
    hash_rows(&mut h, &b0.link_ineq);
    h.finish()
}

/// Structural check of a distributed problem. Collective; every rank
/// receives the same list covering all ranks.
pub fn validate_arrowhead(p: &BlockProblem, comm: &Communicator) -> Vec<String> {
    let rank = comm.rank();
    let mut mine: Vec<String> = local_violations(p).into_iter().map(|s| format!("rank {rank}: {s}")).collect();
    let sums = comm.allgather_one(replicated_checksum(p));
    if sums[rank] != sums[0] {
        mine.push(format!("rank {rank}: replicated data differ from rank 0"));
    }
    comm.allgather(mine)
}

/// Global nonzero, row and column counts; replicated parts are counted once.
pub fn nnz_counts(p: &BlockProblem, comm: &Communicator) -> ProblemSize {
    let b0 = &p.block0;
    let mut v = [0usize; 3];
    for blk in &p.blocks {
        v[0] += blk.a.nnz() + blk.b.nnz() + blk.c.nnz() + blk.d.nnz() + blk.f.nnz() + blk.g.nnz();
        v[1] += blk.eq.len() + blk.ineq.len();
        v[2] += blk.cols.len();
    }
    if comm.rank() == 0 {
        v[0] += b0.a.nnz() + b0.c.nnz() + b0.f.nnz() + b0.g.nnz();
        v[1] += b0.eq.len() + b0.ineq.len() + b0.link_eq.len() + b0.link_ineq.len();
        v[2] += b0.cols.len();
    }
    let s = comm.allreduce(&v, &ReduceOp::<usize>::sum());
    ProblemSize { nnz: s[0], rows: s[1], cols: s[2] }
}

/// `(linking rows, linking columns)`. Linking columns that touch no diagonal
/// block row (0-link columns) are not counted. Collective.
pub fn linking_counts(p: &BlockProblem, comm: &Communicator) -> (usize, usize) {
    let b0 = &p.block0;
    let n0 = b0.cols.len();
    let mut touched = vec![false; n0];
    for blk in &p.blocks {
        for m in [&blk.a, &blk.c] {
            for i in 0..m.nrows() {
                for &c in m.row_cols(i) {
                    touched[c] = true;
                }
            }
        }
    }
    let touched = comm.allreduce(&touched, &ReduceOp::or());
    (b0.link_eq.len() + b0.link_ineq.len(), touched.iter().filter(|&&t| t).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::{ExecMode, World};
    use crate::model::{LocalBlock, VarData};

    fn two_block() -> BlockProblem {
        let mut p = BlockProblem { n_blocks: 2, ..Default::default() };
        p.ids.n_cols = 3;
        p.ids.n_eq = 3;
        p.block0.cols = ColGroup { ids: vec![0], vars: vec![VarData::new("x0", 0.0, 1.0, 0.0)] };
        p.block0.a = SparseMatrix::zeros(0, 1);
        p.block0.c = SparseMatrix::zeros(0, 1);
        p.block0.f = SparseMatrix::from_rows(1, vec![vec![(0, 1.0)]]);
        p.block0.g = SparseMatrix::zeros(0, 1);
        p.block0.link_eq.push(2, "l".into(), 1.0, 1.0);
        for b in 1..=2 {
            let mut blk = LocalBlock { id: b, ..Default::default() };
            blk.cols = ColGroup { ids: vec![b], vars: vec![VarData::new(format!("x{b}"), 0.0, 1.0, 0.0)] };
            blk.a = SparseMatrix::from_rows(1, vec![vec![(0, 1.0)]]);
            blk.b = SparseMatrix::from_rows(1, vec![vec![(0, 2.0)]]);
            blk.eq.push(b - 1, format!("r{b}"), 1.0, 1.0);
            blk.c = SparseMatrix::zeros(0, 1);
            blk.d = SparseMatrix::zeros(0, 1);
            blk.f = SparseMatrix::from_rows(1, vec![vec![(0, 1.0)]]);
            blk.g = SparseMatrix::zeros(0, 1);
            p.blocks.push(blk);
        }
        p
    }

    #[test]
    fn counts_replicated_parts_once() {
        let p = two_block();
        let out = World::new(2, ExecMode::Lockstep)
            .run(|c| {
                let s = &p.split_for_ranks(2)[c.rank()];
                (nnz_counts(s, c), validate_arrowhead(s, c), linking_counts(s, c))
            })
            .unwrap();
        for (size, viol, link) in out {
            assert_eq!(size, ProblemSize { nnz: 7, rows: 3, cols: 3 });
            assert!(viol.is_empty(), "{viol:?}");
            assert_eq!(link, (1, 1));
        }
    }

    #[test]
    fn detects_divergent_replicas_and_inverted_bounds() {
        let p = two_block();
        let out = World::new(2, ExecMode::Threaded)
            .run(|c| {
                let mut s = p.split_for_ranks(2)[c.rank()].clone();
                if c.rank() == 1 {
                    s.block0.cols.vars[0].upper = 2.0;
                    s.blocks[0].cols.vars[0].lower = 5.0;
                }
                validate_arrowhead(&s, c)
            })
            .unwrap();
        for v in out {
            assert_eq!(v.len(), 2, "{v:?}");
            assert!(v.iter().any(|s| s.contains("replicated")));
            assert!(v.iter().any(|s| s.contains("inverted")));
        }
    }
}
