use serde::{Deserialize, Serialize};

use super::{BlockAssignment, IdSpace, LpProblem, RowOwner, SparseMatrix, VarData};

/// Rows of one group with their original ids. Equality rows have `lower == upper`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RowGroup {
    pub ids: Vec<usize>,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RowGroup {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn push(&mut self, id: usize, name: String, lower: f64, upper: f64) {
        self.ids.push(id);
        self.names.push(name);
        self.lower.push(lower);
        self.upper.push(upper);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColGroup {
    pub ids: Vec<usize>,
    pub vars: Vec<VarData>,
}

impl ColGroup {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Data replicated on every rank: linking columns, block-0 rows and the
/// linking-column part of the linking rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Block0 {
    pub cols: ColGroup,
    pub a: SparseMatrix,
    pub eq: RowGroup,
    pub c: SparseMatrix,
    pub ineq: RowGroup,
    pub f: SparseMatrix,
    pub link_eq: RowGroup,
    pub g: SparseMatrix,
    pub link_ineq: RowGroup,
}

/// Diagonal block `id` with its borders: `a`/`c` act on the linking columns,
/// `b`/`d` on the block's own columns, `f`/`g` are the block's part of the
/// linking rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalBlock {
    pub id: usize,
    pub cols: ColGroup,
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub eq: RowGroup,
    pub c: SparseMatrix,
    pub d: SparseMatrix,
    pub ineq: RowGroup,
    pub f: SparseMatrix,
    pub g: SparseMatrix,
}

/// Arrowhead LP. A per-rank slice holds the replicated block 0 and only the
/// rank's own diagonal blocks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockProblem {
    pub name: String,
    pub n_blocks: usize,
    pub ids: IdSpace,
    pub block0: Block0,
    pub blocks: Vec<LocalBlock>,
    pub obj_offset: f64,
}

/// Maps rows and columns of an assembled LP back to original ids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexMaps {
    /// Unified row index of the assembled LP -> original row id.
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
}

impl BlockProblem {
    /// Splits a monolithic LP by `assignment`. Row and column ids are the
    /// LP's own indices.
    pub fn split(lp: &LpProblem, assignment: &BlockAssignment) -> Result<BlockProblem, String> {
        let n = assignment.n_blocks;
        if assignment.cols.len() != lp.n_cols()
            || assignment.eq_rows.len() != lp.n_eq()
            || assignment.ineq_rows.len() != lp.n_ineq()
        {
            return Err("block assignment does not match problem dimensions".into());
        }
        if let Some(&b) = assignment.cols.iter().find(|&&b| b > n) {
            return Err(format!("column assigned to block {b} but only {n} blocks declared"));
        }
        let pos = assignment.col_positions();
        let mut groups: Vec<ColGroup> = vec![ColGroup::default(); n + 1];
        for (j, &b) in assignment.cols.iter().enumerate() {
            groups[b].ids.push(j);
            groups[b].vars.push(lp.vars[j].clone());
        }
        let widths: Vec<usize> = groups.iter().map(|g| g.len()).collect();

        let mut p = BlockProblem {
            name: lp.name.clone(),
            n_blocks: n,
            ids: lp.id_space(),
            obj_offset: lp.obj_offset,
            ..Default::default()
        };
        p.block0.cols = groups[0].clone();
        p.block0.a = SparseMatrix::zeros(0, widths[0]);
        p.block0.c = SparseMatrix::zeros(0, widths[0]);
        p.block0.f = SparseMatrix::zeros(0, widths[0]);
        p.block0.g = SparseMatrix::zeros(0, widths[0]);
        p.blocks = (1..=n)
            .map(|b| LocalBlock {
                id: b,
                cols: groups[b].clone(),
                a: SparseMatrix::zeros(0, widths[0]),
                b: SparseMatrix::zeros(0, widths[b]),
                c: SparseMatrix::zeros(0, widths[0]),
                d: SparseMatrix::zeros(0, widths[b]),
                f: SparseMatrix::zeros(0, widths[b]),
                g: SparseMatrix::zeros(0, widths[b]),
                ..Default::default()
            })
            .collect();

        for id in 0..lp.n_rows() {
            let eq = id < lp.n_eq();
            let owner = if eq { assignment.eq_rows[id] } else { assignment.ineq_rows[id - lp.n_eq()] };
            let (lo, up) = lp.row_bounds(id);
            let name = lp.row_name(id).to_string();
            let mut parts: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
            for (c, v) in lp.row(id) {
                let (b, k) = pos[c];
                parts[b].push((k, v));
            }
            match owner {
                RowOwner::Block(b) if b > n => {
                    return Err(format!("row {name} assigned to block {b} but only {n} blocks declared"));
                }
                RowOwner::Block(b) => {
                    if let Some(bad) = (1..=n).find(|&k| k != b && !parts[k].is_empty()) {
                        return Err(format!("row {name} of block {b} has entries in block {bad}"));
                    }
                    if b == 0 {
                        let (m, g) = if eq { (&mut p.block0.a, &mut p.block0.eq) } else { (&mut p.block0.c, &mut p.block0.ineq) };
                        m.push_row(parts[0].drain(..));
                        g.push(id, name, lo, up);
                    } else {
                        let blk = &mut p.blocks[b - 1];
                        let local = std::mem::take(&mut parts[b]);
                        if eq {
                            blk.a.push_row(parts[0].drain(..));
                            blk.b.push_row(local);
                            blk.eq.push(id, name, lo, up);
                        } else {
                            blk.c.push_row(parts[0].drain(..));
                            blk.d.push_row(local);
                            blk.ineq.push(id, name, lo, up);
                        }
                    }
                }
                RowOwner::Link => {
                    if eq {
                        p.block0.f.push_row(parts[0].drain(..));
                        p.block0.link_eq.push(id, name, lo, up);
                    } else {
                        p.block0.g.push_row(parts[0].drain(..));
                        p.block0.link_ineq.push(id, name, lo, up);
                    }
                    for b in 1..=n {
                        let local = std::mem::take(&mut parts[b]);
                        let blk = &mut p.blocks[b - 1];
                        if eq {
                            blk.f.push_row(local);
                        } else {
                            blk.g.push_row(local);
                        }
                    }
                }
            }
        }
        Ok(p)
    }

    /// Stacks the blocks into a monolithic LP: rows of block 0, blocks 1..N,
    /// then the linking rows; columns linking first, then block by block.
    pub fn assemble(&self) -> (LpProblem, IndexMaps, BlockAssignment) {
        let b0 = &self.block0;
        let n0 = b0.cols.len();
        let mut col_ids = b0.cols.ids.clone();
        let mut vars = b0.cols.vars.clone();
        let mut offsets = Vec::with_capacity(self.blocks.len());
        let mut asg = BlockAssignment { n_blocks: self.n_blocks, ..Default::default() };
        asg.cols.extend(std::iter::repeat(0).take(n0));
        for blk in &self.blocks {
            offsets.push(col_ids.len());
            col_ids.extend(&blk.cols.ids);
            vars.extend(blk.cols.vars.iter().cloned());
            asg.cols.extend(std::iter::repeat(blk.id).take(blk.cols.len()));
        }
        let ncols = col_ids.len();

        let mut eq = SparseMatrix::zeros(0, ncols);
        let mut ineq = SparseMatrix::zeros(0, ncols);
        let mut eq_g = RowGroup::default();
        let mut ineq_g = RowGroup::default();
        let append = |dst: &mut RowGroup, src: &RowGroup| {
            dst.ids.extend(&src.ids);
            dst.names.extend(src.names.iter().cloned());
            dst.lower.extend(&src.lower);
            dst.upper.extend(&src.upper);
        };
        for i in 0..b0.eq.len() {
            eq.push_row(shift(&b0.a, i, 0));
            asg.eq_rows.push(RowOwner::Block(0));
        }
        append(&mut eq_g, &b0.eq);
        for i in 0..b0.ineq.len() {
            ineq.push_row(shift(&b0.c, i, 0));
            asg.ineq_rows.push(RowOwner::Block(0));
        }
        append(&mut ineq_g, &b0.ineq);
        for (blk, &off) in self.blocks.iter().zip(&offsets) {
            for i in 0..blk.eq.len() {
                eq.push_row(shift(&blk.a, i, 0).chain(shift(&blk.b, i, off)));
                asg.eq_rows.push(RowOwner::Block(blk.id));
            }
            append(&mut eq_g, &blk.eq);
            for i in 0..blk.ineq.len() {
                ineq.push_row(shift(&blk.c, i, 0).chain(shift(&blk.d, i, off)));
                asg.ineq_rows.push(RowOwner::Block(blk.id));
            }
            append(&mut ineq_g, &blk.ineq);
        }
        for i in 0..b0.link_eq.len() {
            let mut row: Vec<(usize, f64)> = shift(&b0.f, i, 0).collect();
            for (blk, &off) in self.blocks.iter().zip(&offsets) {
                row.extend(shift(&blk.f, i, off));
            }
            eq.push_row(row);
            asg.eq_rows.push(RowOwner::Link);
        }
        append(&mut eq_g, &b0.link_eq);
        for i in 0..b0.link_ineq.len() {
            let mut row: Vec<(usize, f64)> = shift(&b0.g, i, 0).collect();
            for (blk, &off) in self.blocks.iter().zip(&offsets) {
                row.extend(shift(&blk.g, i, off));
            }
            ineq.push_row(row);
            asg.ineq_rows.push(RowOwner::Link);
        }
        append(&mut ineq_g, &b0.link_ineq);

        let row_ids = eq_g.ids.iter().chain(&ineq_g.ids).copied().collect();
        let lp = LpProblem {
            name: self.name.clone(),
            vars,
            eq,
            eq_rhs: eq_g.lower,
            eq_names: eq_g.names,
            ineq,
            ineq_lower: ineq_g.lower,
            ineq_upper: ineq_g.upper,
            ineq_names: ineq_g.names,
            obj_offset: self.obj_offset,
        };
        (lp, IndexMaps { row_ids, col_ids }, asg)
    }

    /// Monolithic LP with every row and column at its original id. Only valid
    /// for a complete problem whose ids cover the whole id space.
    pub fn to_lp_by_id(&self) -> Result<LpProblem, String> {
        let (lp, maps, _) = self.assemble();
        let ids = self.ids;
        if maps.col_ids.len() != ids.n_cols || maps.row_ids.len() != ids.n_rows() {
            return Err("problem does not cover its id space".into());
        }
        let mut col_at = vec![usize::MAX; ids.n_cols];
        for (k, &id) in maps.col_ids.iter().enumerate() {
            col_at[id] = k;
        }
        let mut row_at = vec![usize::MAX; ids.n_rows()];
        for (k, &id) in maps.row_ids.iter().enumerate() {
            row_at[id] = k;
        }
        if col_at.contains(&usize::MAX) || row_at.contains(&usize::MAX) {
            return Err("ids are not a permutation of the id space".into());
        }
        let vars = col_at.iter().map(|&k| lp.vars[k].clone()).collect();
        let remap = |k: usize| lp.row(k).map(|(c, v)| (maps.col_ids[c], v)).collect::<Vec<_>>();
        let eq = SparseMatrix::from_rows(ids.n_cols, (0..ids.n_eq).map(|id| remap(row_at[id])));
        let ineq = SparseMatrix::from_rows(ids.n_cols, (ids.n_eq..ids.n_rows()).map(|id| remap(row_at[id])));
        let n_eq = lp.n_eq();
        let mut out = LpProblem { name: lp.name.clone(), vars, eq, ineq, obj_offset: lp.obj_offset, ..Default::default() };
        for id in 0..ids.n_eq {
            let k = row_at[id];
            if k >= n_eq {
                return Err(format!("row id {id} is an equality id but holds an inequality"));
            }
            out.eq_rhs.push(lp.eq_rhs[k]);
            out.eq_names.push(lp.eq_names[k].clone());
        }
        for id in ids.n_eq..ids.n_rows() {
            let k = row_at[id];
            if k < n_eq {
                return Err(format!("row id {id} is an inequality id but holds an equality"));
            }
            out.ineq_lower.push(lp.ineq_lower[k - n_eq]);
            out.ineq_upper.push(lp.ineq_upper[k - n_eq]);
            out.ineq_names.push(lp.ineq_names[k - n_eq].clone());
        }
        Ok(out)
    }

    /// Per-rank slices: block 0 replicated, diagonal blocks distributed in
    /// contiguous ranges. The objective offset travels with rank 0.
    pub fn split_for_ranks(&self, nranks: usize) -> Vec<BlockProblem> {
        (0..nranks)
            .map(|r| {
                let own = super::blocks_of_rank(r, self.n_blocks, nranks);
                BlockProblem {
                    name: self.name.clone(),
                    n_blocks: self.n_blocks,
                    ids: self.ids,
                    block0: self.block0.clone(),
                    blocks: self.blocks.iter().filter(|b| own.contains(&b.id)).cloned().collect(),
                    obj_offset: if r == 0 { self.obj_offset } else { 0.0 },
                }
            })
            .collect()
    }

    /// Reassembles per-rank slices into one problem.
    pub fn gather(slices: &[BlockProblem]) -> BlockProblem {
        let first = &slices[0];
        let mut blocks: Vec<LocalBlock> = slices.iter().flat_map(|s| s.blocks.iter().cloned()).collect();
        blocks.sort_by_key(|b| b.id);
        BlockProblem {
            name: first.name.clone(),
            n_blocks: first.n_blocks,
            ids: first.ids,
            block0: first.block0.clone(),
            blocks,
            obj_offset: slices.iter().map(|s| s.obj_offset).sum(),
        }
    }

    pub fn n_cols(&self) -> usize {
        self.block0.cols.len() + self.blocks.iter().map(|b| b.cols.len()).sum::<usize>()
    }

    pub fn n_rows(&self) -> usize {
        let b0 = &self.block0;
        b0.eq.len() + b0.ineq.len() + b0.link_eq.len() + b0.link_ineq.len()
            + self.blocks.iter().map(|b| b.eq.len() + b.ineq.len()).sum::<usize>()
    }

    pub fn nnz(&self) -> usize {
        let b0 = &self.block0;
        b0.a.nnz() + b0.c.nnz() + b0.f.nnz() + b0.g.nnz()
            + self.blocks.iter().map(|b| b.a.nnz() + b.b.nnz() + b.c.nnz() + b.d.nnz() + b.f.nnz() + b.g.nnz()).sum::<usize>()
    }
}

fn shift(m: &SparseMatrix, i: usize, off: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    m.row(i).map(move |(c, v)| (c + off, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::INF;

    fn small() -> (LpProblem, BlockAssignment) {
        // x0 linking, x1 in block 1, x2 x3 in block 2
        let vars = (0..4).map(|j| VarData::new(format!("x{j}"), 0.0, 10.0, 1.0)).collect();
        let eq = SparseMatrix::from_rows(4, vec![vec![(0, 1.0), (1, 2.0)], vec![(2, 1.0), (3, -1.0)], vec![(1, 1.0), (3, 1.0)]]);
        let ineq = SparseMatrix::from_rows(4, vec![vec![(0, 1.0)]]);
        let lp = LpProblem {
            name: "t".into(),
            vars,
            eq,
            eq_rhs: vec![1.0, 0.0, 2.0],
            eq_names: vec!["r0".into(), "r1".into(), "r2".into()],
            ineq,
            ineq_lower: vec![-INF],
            ineq_upper: vec![5.0],
            ineq_names: vec!["q0".into()],
            obj_offset: 0.5,
        };
        let asg = BlockAssignment {
            n_blocks: 2,
            eq_rows: vec![RowOwner::Block(1), RowOwner::Block(2), RowOwner::Link],
            ineq_rows: vec![RowOwner::Block(0)],
            cols: vec![0, 1, 2, 2],
        };
        (lp, asg)
    }

    #[test]
    fn split_assemble_by_id_round_trip() {
        let (lp, asg) = small();
        let p = BlockProblem::split(&lp, &asg).unwrap();
        assert_eq!(p.blocks[0].a.nnz(), 1);
        assert_eq!(p.blocks[1].f.nnz(), 1);
        assert_eq!(p.block0.f.nnz(), 0);
        assert_eq!(p.to_lp_by_id().unwrap(), lp);
        assert_eq!(p.nnz(), lp.nnz());
    }

    #[test]
    fn rank_slices_gather_back() {
        let (lp, asg) = small();
        let p = BlockProblem::split(&lp, &asg).unwrap();
        let slices = p.split_for_ranks(2);
        assert_eq!(slices[1].blocks.len(), 1);
        assert_eq!(BlockProblem::gather(&slices), p);
    }

    #[test]
    fn rejects_cross_block_rows() {
        let (lp, mut asg) = small();
        asg.eq_rows[2] = RowOwner::Block(1);
        assert!(BlockProblem::split(&lp, &asg).is_err());
    }
}
