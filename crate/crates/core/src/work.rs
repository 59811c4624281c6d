//! Per-rank working form of an arrowhead problem.
//!
//! Rows and columns are addressed by their original ids. A rank stores the
//! replicated block-0 and linking rows, the linking columns, and the rows and
//! columns of the blocks it owns; everything else is `None`. Deleted entities
//! stay in place as tombstones until the problem is written back out.

use serde::{Deserialize, Serialize};

use crate::comm::Communicator;
use crate::error::PresolveError;
use crate::model::{blocks_of_rank, BlockProblem, ColGroup, IdSpace, LocalBlock, RowGroup, RowKind, SparseMatrix, VarData};
use crate::postsolve::{Side, StackEntry};
use crate::presolve::Tally;
use crate::tracking::{Activity, Tracking};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowScope {
    /// Block-0 row over linking columns only, replicated.
    Zero,
    /// Row of diagonal block `b >= 1`.
    Local(usize),
    /// Linking row, replicated.
    Link,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub scope: RowScope,
    pub alive: bool,
    pub lower: f64,
    pub upper: f64,
    /// `(column id, coefficient)` sorted by column id; columns present here only.
    pub entries: Vec<(usize, f64)>,
    /// Row has been the source of a bound change whose dual may be shifted onto it.
    pub dual_locked: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Col {
    pub name: String,
    /// 0 for linking columns.
    pub block: usize,
    pub alive: bool,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    /// `(row id, coefficient)` sorted by row id; rows present here only.
    pub entries: Vec<(usize, f64)>,
}

/// A bound change on a linking column proposed by one rank, applied after a
/// min/max reduction over all ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCandidate {
    pub col: usize,
    pub side: Side,
    pub value: f64,
    pub row: usize,
    pub coef: f64,
}

pub struct RankProblem {
    pub name: String,
    pub rank: usize,
    pub nranks: usize,
    pub n_blocks: usize,
    pub ids: IdSpace,
    pub own_blocks: Vec<usize>,
    pub rows: Vec<Option<Row>>,
    pub cols: Vec<Option<Col>>,
    pub offset: f64,
    pub track: Tracking,
    pub status: Option<PresolveError>,
    pub local_stack: Vec<StackEntry>,
    pub global_stack: Vec<StackEntry>,
    pub bound_cands: Vec<BoundCandidate>,
    pub tally: Tally,
}

fn group_rows(
    rows: &mut [Option<Row>],
    g: &RowGroup,
    kind: RowKind,
    scope: RowScope,
    parts: &[(&SparseMatrix, &[usize])],
) {
    for k in 0..g.len() {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (m, ids) in parts {
            entries.extend(m.row(k).map(|(c, v)| (ids[c], v)));
        }
        entries.sort_by_key(|e| e.0);
        rows[g.ids[k]] = Some(Row {
            name: g.names[k].clone(),
            kind,
            scope,
            alive: true,
            lower: g.lower[k],
            upper: g.upper[k],
            entries,
            dual_locked: false,
        });
    }
}

impl RankProblem {
    /// Builds the working form of this rank's slice and its tracking state.
    /// Collective.
    pub fn from_slice(p: &BlockProblem, comm: &Communicator) -> Self {
        let (rank, nranks) = (comm.rank(), comm.size());
        let mut rows: Vec<Option<Row>> = vec![None; p.ids.n_rows()];
        let mut cols: Vec<Option<Col>> = vec![None; p.ids.n_cols];
        let mut add_cols = |g: &ColGroup, block: usize| {
            for (id, v) in g.ids.iter().zip(&g.vars) {
                cols[*id] = Some(Col {
                    name: v.name.clone(),
                    block,
                    alive: true,
                    lower: v.lower,
                    upper: v.upper,
                    cost: v.cost,
                    entries: Vec::new(),
                });
            }
        };
        let b0 = &p.block0;
        add_cols(&b0.cols, 0);
        for blk in &p.blocks {
            add_cols(&blk.cols, blk.id);
        }
        let x0 = b0.cols.ids.as_slice();
        group_rows(&mut rows, &b0.eq, RowKind::Equality, RowScope::Zero, &[(&b0.a, x0)]);
        group_rows(&mut rows, &b0.ineq, RowKind::Inequality, RowScope::Zero, &[(&b0.c, x0)]);
        let mut feq: Vec<(&SparseMatrix, &[usize])> = vec![(&b0.f, x0)];
        let mut fineq: Vec<(&SparseMatrix, &[usize])> = vec![(&b0.g, x0)];
        for blk in &p.blocks {
            feq.push((&blk.f, &blk.cols.ids));
            fineq.push((&blk.g, &blk.cols.ids));
            let s = RowScope::Local(blk.id);
            group_rows(&mut rows, &blk.eq, RowKind::Equality, s, &[(&blk.a, x0), (&blk.b, &blk.cols.ids)]);
            group_rows(&mut rows, &blk.ineq, RowKind::Inequality, s, &[(&blk.c, x0), (&blk.d, &blk.cols.ids)]);
        }
        group_rows(&mut rows, &b0.link_eq, RowKind::Equality, RowScope::Link, &feq);
        group_rows(&mut rows, &b0.link_ineq, RowKind::Inequality, RowScope::Link, &fineq);
        for (r, row) in rows.iter().enumerate() {
            if let Some(row) = row {
                for &(j, a) in &row.entries {
                    cols[j].as_mut().expect("row references absent column").entries.push((r, a));
                }
            }
        }
        let mut out = RankProblem {
            name: p.name.clone(),
            rank,
            nranks,
            n_blocks: p.n_blocks,
            ids: p.ids,
            own_blocks: blocks_of_rank(rank, p.n_blocks, nranks).collect(),
            rows,
            cols,
            offset: p.obj_offset,
            track: Tracking::default(),
            status: None,
            local_stack: Vec::new(),
            global_stack: Vec::new(),
            bound_cands: Vec::new(),
            tally: Tally::default(),
        };
        out.rebuild_tracking(comm);
        out
    }

    /// Writes the live part of the working form back as a block slice.
    pub fn to_block_problem(&self) -> BlockProblem {
        let live_cols = |block: usize| -> ColGroup {
            let mut g = ColGroup::default();
            for (j, c) in self.cols.iter().enumerate() {
                if let Some(c) = c {
                    if c.alive && c.block == block {
                        g.ids.push(j);
                        g.vars.push(VarData::new(c.name.clone(), c.lower, c.upper, c.cost));
                    }
                }
            }
            g
        };
        let x0 = live_cols(0);
        let mut local_index = vec![usize::MAX; self.cols.len()];
        for (k, &j) in x0.ids.iter().enumerate() {
            local_index[j] = k;
        }
        let groups: Vec<(usize, ColGroup)> = self.own_blocks.iter().map(|&b| (b, live_cols(b))).collect();
        for (_, g) in &groups {
            for (k, &j) in g.ids.iter().enumerate() {
                local_index[j] = k;
            }
        }
        let select = |scope: RowScope, kind: RowKind| -> Vec<usize> {
            (0..self.rows.len())
                .filter(|&r| matches!(&self.rows[r], Some(row) if row.alive && row.scope == scope && row.kind == kind))
                .collect()
        };
        let row_group = |ids: &[usize]| -> RowGroup {
            let mut g = RowGroup::default();
            for &r in ids {
                let row = self.row(r);
                g.push(r, row.name.clone(), row.lower, row.upper);
            }
            g
        };
        let matrix = |ids: &[usize], block: usize, ncols: usize| -> SparseMatrix {
            SparseMatrix::from_rows(
                ncols,
                ids.iter().map(|&r| {
                    self.row(r)
                        .entries
                        .iter()
                        .filter(|(j, _)| self.col(*j).block == block)
                        .map(|&(j, a)| (local_index[j], a))
                        .collect::<Vec<_>>()
                }),
            )
        };
        let n0 = x0.len();
        let z_eq = select(RowScope::Zero, RowKind::Equality);
        let z_in = select(RowScope::Zero, RowKind::Inequality);
        let l_eq = select(RowScope::Link, RowKind::Equality);
        let l_in = select(RowScope::Link, RowKind::Inequality);
        let mut p = BlockProblem {
            name: self.name.clone(),
            n_blocks: self.n_blocks,
            ids: self.ids,
            obj_offset: self.offset,
            ..Default::default()
        };
        p.block0.a = matrix(&z_eq, 0, n0);
        p.block0.c = matrix(&z_in, 0, n0);
        p.block0.f = matrix(&l_eq, 0, n0);
        p.block0.g = matrix(&l_in, 0, n0);
        p.block0.eq = row_group(&z_eq);
        p.block0.ineq = row_group(&z_in);
        p.block0.link_eq = row_group(&l_eq);
        p.block0.link_ineq = row_group(&l_in);
        p.block0.cols = x0;
        for (b, g) in groups {
            let ni = g.len();
            let eq = select(RowScope::Local(b), RowKind::Equality);
            let ineq = select(RowScope::Local(b), RowKind::Inequality);
            p.blocks.push(LocalBlock {
                id: b,
                a: matrix(&eq, 0, n0),
                b: matrix(&eq, b, ni),
                eq: row_group(&eq),
                c: matrix(&ineq, 0, n0),
                d: matrix(&ineq, b, ni),
                ineq: row_group(&ineq),
                f: matrix(&l_eq, b, ni),
                g: matrix(&l_in, b, ni),
                cols: g,
            });
        }
        p
    }

    pub fn row(&self, r: usize) -> &Row {
        self.rows[r].as_ref().unwrap_or_else(|| panic!("row {r} not present on rank {}", self.rank))
    }

    pub fn row_mut(&mut self, r: usize) -> &mut Row {
        let rank = self.rank;
        self.rows[r].as_mut().unwrap_or_else(|| panic!("row {r} not present on rank {rank}"))
    }

    pub fn col(&self, j: usize) -> &Col {
        self.cols[j].as_ref().unwrap_or_else(|| panic!("column {j} not present on rank {}", self.rank))
    }

    pub fn col_mut(&mut self, j: usize) -> &mut Col {
        let rank = self.rank;
        self.cols[j].as_mut().unwrap_or_else(|| panic!("column {j} not present on rank {rank}"))
    }

    pub fn row_alive(&self, r: usize) -> bool {
        matches!(&self.rows[r], Some(row) if row.alive)
    }

    pub fn col_alive(&self, j: usize) -> bool {
        matches!(&self.cols[j], Some(c) if c.alive)
    }

    pub fn owns(&self, block: usize) -> bool {
        self.own_blocks.contains(&block)
    }

    pub fn live_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&r| self.row_alive(r)).collect()
    }

    pub fn live_cols(&self) -> Vec<usize> {
        (0..self.cols.len()).filter(|&j| self.col_alive(j)).collect()
    }

    pub fn alive_link_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&r| matches!(&self.rows[r], Some(row) if row.alive && row.scope == RowScope::Link)).collect()
    }

    pub fn alive_linking_cols(&self) -> Vec<usize> {
        (0..self.cols.len()).filter(|&j| matches!(&self.cols[j], Some(c) if c.alive && c.block == 0)).collect()
    }

    pub fn fail(&mut self, err: PresolveError) {
        if self.status.is_none() {
            self.status = Some(err);
        }
    }

    pub fn failed(&self) -> bool {
        self.status.is_some()
    }

    /// Whether this rank counts a change to entity data replicated on all ranks.
    pub fn counts_replicated(&self) -> bool {
        self.rank == 0
    }

    fn entry_counted(&self, scope: RowScope, col_block: usize) -> bool {
        let replicated = col_block == 0 && !matches!(scope, RowScope::Local(_));
        !replicated || self.rank == 0
    }

    pub fn row_counted(&self, scope: RowScope) -> bool {
        matches!(scope, RowScope::Local(_)) || self.rank == 0
    }

    pub fn col_counted(&self, block: usize) -> bool {
        block != 0 || self.rank == 0
    }

    /// Activity as seen by this rank: shared record plus own pending deltas.
    pub fn activity(&self, r: usize) -> Activity {
        let mut a = self.track.act[r].clone();
        if let Some(d) = self.track.buf_act.get(&r) {
            a.merge(d);
        }
        a
    }

    pub fn row_nnz(&self, r: usize) -> i64 {
        self.track.row_nnz[r] + self.track.buf_row_nnz.get(&r).copied().unwrap_or(0)
    }

    pub fn col_nnz(&self, j: usize) -> i64 {
        self.track.col_nnz[j] + self.track.buf_col_nnz.get(&j).copied().unwrap_or(0)
    }

    fn act_term(&mut self, r: usize, scope: RowScope, block: usize, a: f64, l: f64, u: f64, sign: i64) {
        if Self::row_buffered(scope, block) {
            self.track.buf_act.entry(r).or_default().add_term(a, l, u, sign);
        } else {
            self.track.act[r].add_term(a, l, u, sign);
        }
    }

    fn count_row_nnz(&mut self, r: usize, scope: RowScope, block: usize, delta: i64) {
        if Self::row_buffered(scope, block) {
            *self.track.buf_row_nnz.entry(r).or_default() += delta;
        } else {
            self.track.row_nnz[r] += delta;
        }
    }

    fn count_col_nnz(&mut self, j: usize, scope: RowScope, block: usize, delta: i64) {
        if Self::col_buffered(scope, block) {
            *self.track.buf_col_nnz.entry(j).or_default() += delta;
        } else {
            self.track.col_nnz[j] += delta;
        }
    }

    /// Replaces the bounds of column `j`, updating activities of its rows.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        let col = self.col_mut(j);
        let (ol, ou, block) = (col.lower, col.upper, col.block);
        if ol == lower && ou == upper {
            return;
        }
        col.lower = lower;
        col.upper = upper;
        let entries = std::mem::take(&mut self.col_mut(j).entries);
        for &(r, a) in &entries {
            let scope = self.row(r).scope;
            self.act_term(r, scope, block, a, ol, ou, -1);
            self.act_term(r, scope, block, a, lower, upper, 1);
        }
        self.col_mut(j).entries = entries;
    }

    /// Removes the entry `(r, j)` and returns its coefficient.
    pub fn remove_entry(&mut self, r: usize, j: usize) -> f64 {
        let row = self.row_mut(r);
        let scope = row.scope;
        let k = row.entries.binary_search_by_key(&j, |e| e.0).expect("entry not in row");
        let a = row.entries.remove(k).1;
        let col = self.col_mut(j);
        let k = col.entries.binary_search_by_key(&r, |e| e.0).expect("entry not in column");
        col.entries.remove(k);
        let (l, u, block) = (col.lower, col.upper, col.block);
        self.act_term(r, scope, block, a, l, u, -1);
        self.count_row_nnz(r, scope, block, -1);
        self.count_col_nnz(j, scope, block, -1);
        if self.entry_counted(scope, block) {
            self.tally.entries_deleted += 1;
        }
        a
    }

    /// Fixes column `j` at `value` and removes it, moving its contribution to
    /// row bounds and the objective offset.
    pub fn fix_col(&mut self, j: usize, value: f64) {
        let col = self.col_mut(j);
        debug_assert!(col.alive);
        let (block, cost) = (col.block, col.cost);
        let entries = col.entries.clone();
        for &(r, a) in &entries {
            let scope = self.row(r).scope;
            let shift = a * value;
            if Self::row_buffered(scope, block) {
                *self.track.buf_rhs.entry(r).or_default() += shift;
            } else {
                let row = self.row_mut(r);
                row.lower -= shift;
                row.upper -= shift;
            }
            self.remove_entry(r, j);
        }
        if self.col_counted(block) {
            self.offset += cost * value;
            self.tally.cols_deleted += 1;
            self.tally.vars_fixed += 1;
        }
        let col = self.col_mut(j);
        col.alive = false;
        col.lower = value;
        col.upper = value;
    }

    /// Deletes a column that has no entries left.
    pub fn delete_empty_col(&mut self, j: usize) {
        let col = self.col_mut(j);
        debug_assert!(col.entries.is_empty());
        col.alive = false;
        let block = col.block;
        if self.col_counted(block) {
            self.tally.cols_deleted += 1;
        }
    }

    pub fn delete_row(&mut self, r: usize) {
        let row = self.row_mut(r);
        debug_assert!(row.alive);
        let scope = row.scope;
        let entries = std::mem::take(&mut row.entries);
        row.alive = false;
        for &(j, _) in &entries {
            let col = self.col_mut(j);
            let k = col.entries.binary_search_by_key(&r, |e| e.0).expect("entry not in column");
            col.entries.remove(k);
            let block = col.block;
            self.count_col_nnz(j, scope, block, -1);
            if self.entry_counted(scope, block) {
                self.tally.entries_deleted += 1;
            }
        }
        if self.row_counted(scope) {
            self.tally.rows_deleted += 1;
        }
        self.track.act[r] = Activity::default();
        self.track.row_nnz[r] = 0;
        self.track.buf_act.remove(&r);
        self.track.buf_row_nnz.remove(&r);
        self.track.buf_rhs.remove(&r);
    }

    /// Drops row `r` from this rank without deleting it globally.
    pub fn drop_row(&mut self, r: usize) {
        if let Some(row) = self.rows[r].take() {
            for &(j, _) in &row.entries {
                let col = self.col_mut(j);
                if let Ok(k) = col.entries.binary_search_by_key(&r, |e| e.0) {
                    col.entries.remove(k);
                }
            }
        }
    }

    pub fn drop_col(&mut self, j: usize) {
        if let Some(col) = self.cols[j].take() {
            for &(r, _) in &col.entries {
                let row = self.row_mut(r);
                if let Ok(k) = row.entries.binary_search_by_key(&j, |e| e.0) {
                    row.entries.remove(k);
                }
            }
        }
    }

    /// Inserts a row; its entries must reference present columns.
    pub fn insert_row(&mut self, r: usize, row: Row) {
        for &(j, a) in &row.entries {
            let col = self.col_mut(j);
            let k = col.entries.binary_search_by_key(&r, |e| e.0).unwrap_err();
            col.entries.insert(k, (r, a));
        }
        self.rows[r] = Some(row);
    }

    /// Inserts a column; its entries must reference present rows.
    pub fn insert_col(&mut self, j: usize, col: Col) {
        for &(r, a) in &col.entries {
            let row = self.row_mut(r);
            let k = row.entries.binary_search_by_key(&j, |e| e.0).unwrap_err();
            row.entries.insert(k, (j, a));
        }
        self.cols[j] = Some(col);
    }

    pub fn push_local(&mut self, e: StackEntry) {
        self.local_stack.push(e);
    }

    pub fn push_global(&mut self, e: StackEntry) {
        self.global_stack.push(e);
    }

    /// Records an entry on the stage matching the scope of the reduction.
    pub fn push(&mut self, global: bool, e: StackEntry) {
        if global {
            self.global_stack.push(e);
        } else {
            self.local_stack.push(e);
        }
    }
}
