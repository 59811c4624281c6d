use crate::comm::{Communicator, ExecMode, ReduceOp, World};
use crate::error::PostsolveError;
use crate::model::{blocks_of_rank, LpProblem};
use crate::work::RowScope;

use super::{Move, PostsolveStack, PrimalDualSolution, Side, StackEntry};

/// Value an owner hands to the other ranks when an entity returns to the
/// replicated part.
#[derive(Clone, Debug)]
enum Handover {
    Row { row: usize, alive: bool, y: f64 },
    Col { col: usize, alive: bool, x: f64, cost: f64 },
}

struct Replay<'a> {
    comm: &'a Communicator,
    columns: Vec<Vec<(usize, f64)>>,
    own: std::ops::RangeInclusive<usize>,
    row_scope: Vec<Option<RowScope>>,
    row_alive: Vec<bool>,
    col_block: Vec<Option<usize>>,
    col_alive: Vec<bool>,
    cost: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    err: Option<PostsolveError>,
}

fn corrupt(msg: String) -> PostsolveError {
    PostsolveError::StackCorruption(msg)
}

impl Replay<'_> {
    fn owns(&self, block: usize) -> bool {
        self.own.contains(&block)
    }

    fn row_present(&self, r: usize) -> bool {
        self.row_scope[r].is_some()
    }

    fn expect_row(&self, r: usize, alive: bool) -> Result<(), PostsolveError> {
        match self.row_scope.get(r) {
            Some(Some(_)) if self.row_alive[r] == alive => Ok(()),
            Some(Some(_)) => Err(corrupt(format!("row {r} expected {} but is not", if alive { "alive" } else { "deleted" }))),
            _ => Err(corrupt(format!("row {r} is not present on rank {}", self.comm.rank()))),
        }
    }

    fn expect_col(&self, j: usize, alive: bool) -> Result<(), PostsolveError> {
        match self.col_block.get(j) {
            Some(Some(_)) if self.col_alive[j] == alive => Ok(()),
            Some(Some(_)) => Err(corrupt(format!("column {j} expected {} but is not", if alive { "alive" } else { "deleted" }))),
            _ => Err(corrupt(format!("column {j} is not present on rank {}", self.comm.rank()))),
        }
    }

    /// `sum_r a_rj y_r` over the rows this rank accounts for.
    fn partial_dot(&self, j: usize, replicated_too: bool) -> f64 {
        let mut s = 0.0;
        for &(r, a) in &self.columns[j] {
            match self.row_scope[r] {
                None => {}
                Some(RowScope::Local(_)) => s += a * self.y[r],
                Some(_) if replicated_too => s += a * self.y[r],
                Some(_) => {}
            }
        }
        s
    }

    /// Reduced cost of column `j` under the current working costs.
    /// Collective when `global`; the column is then a linking column.
    fn reduced_cost(&self, j: usize, global: bool) -> f64 {
        if global {
            let part = if self.err.is_none() && self.col_block[j].is_some() {
                self.partial_dot(j, self.comm.rank() == 0)
            } else {
                0.0
            };
            self.cost[j] - self.comm.allreduce_one(part, &ReduceOp::<f64>::sum())
        } else {
            self.cost[j] - self.partial_dot(j, true)
        }
    }

    fn undo(&mut self, e: &StackEntry, global: bool) -> Result<(), PostsolveError> {
        match e {
            StackEntry::FixedVar { col, value, .. } => {
                self.expect_col(*col, false)?;
                self.x[*col] = *value;
                self.col_alive[*col] = true;
            }
            StackEntry::SingletonRow { row, col, coef, lower_from_row, upper_from_row, .. } => {
                let check = self.expect_row(*row, false).and(self.expect_col(*col, true));
                let r = self.reduced_cost(*col, global);
                check?;
                self.row_alive[*row] = true;
                let eq = *lower_from_row && *upper_from_row;
                if eq || (r > 0.0 && *lower_from_row) || (r < 0.0 && *upper_from_row) {
                    self.y[*row] += r / coef;
                }
            }
            StackEntry::SubstitutedCol { col, row, coef, rhs, row_entries, cost } => {
                self.expect_row(*row, false)?;
                self.expect_col(*col, false)?;
                let mut s = 0.0;
                for &(k, a) in row_entries {
                    if k != *col {
                        s += a * self.x[k];
                        self.cost[k] += cost * a / coef;
                    }
                }
                self.x[*col] = (rhs - s) / coef;
                self.y[*row] = cost / coef;
                self.row_alive[*row] = true;
                self.col_alive[*col] = true;
            }
            StackEntry::DeletedParallelRow { kept, deleted, lambda, lower_from_deleted, upper_from_deleted, .. } => {
                self.expect_row(*kept, true)?;
                self.expect_row(*deleted, false)?;
                self.row_alive[*deleted] = true;
                let yk = self.y[*kept];
                if (yk > 0.0 && *lower_from_deleted) || (yk < 0.0 && *upper_from_deleted) {
                    self.y[*deleted] = yk / lambda;
                    self.y[*kept] = 0.0;
                }
            }
            StackEntry::DeletedRedundantRow { row, .. } => {
                self.expect_row(*row, false)?;
                self.row_alive[*row] = true;
            }
            StackEntry::LinDepCombination { target, removed, weights } => {
                self.expect_row(*target, !removed)?;
                for &(q, _) in weights {
                    if q != *target {
                        self.expect_row(q, true)?;
                    }
                }
                self.row_alive[*target] = true;
                let v = std::mem::take(&mut self.y[*target]);
                for &(q, w) in weights {
                    self.y[q] += v * w;
                }
            }
            StackEntry::BoundTightened { col, side, row, coef, .. } => {
                let check = self.expect_col(*col, true);
                let r = self.reduced_cost(*col, global);
                check?;
                let shift = match side {
                    Side::Lower => r > 0.0,
                    Side::Upper => r < 0.0,
                };
                if shift && self.row_present(*row) {
                    self.y[*row] += r / coef;
                }
            }
            StackEntry::PermutationMove { moves } => self.undo_moves(moves)?,
            StackEntry::SyncEvent { .. } => unreachable!("handled by the driver"),
        }
        Ok(())
    }
}

impl Replay<'_> {
    fn undo_moves(&mut self, moves: &[Move]) -> Result<(), PostsolveError> {
        let mut mine = Vec::new();
        if self.err.is_none() {
            for m in moves {
                match *m {
                    Move::RowToBlock { row, block } if self.owns(block) => {
                        mine.push(Handover::Row { row, alive: self.row_alive[row], y: self.y[row] })
                    }
                    Move::ColToBlock { col, block } if self.owns(block) => mine.push(Handover::Col {
                        col,
                        alive: self.col_alive[col],
                        x: self.x[col],
                        cost: self.cost[col],
                    }),
                    _ => {}
                }
            }
        }
        let handed = self.comm.allgather(mine);
        if self.err.is_some() {
            return Ok(());
        }
        for h in handed {
            match h {
                Handover::Row { row, alive, y } => {
                    self.row_scope[row] = Some(RowScope::Link);
                    self.row_alive[row] = alive;
                    self.y[row] = y;
                }
                Handover::Col { col, alive, x, cost } => {
                    self.col_block[col] = Some(0);
                    self.col_alive[col] = alive;
                    self.x[col] = x;
                    self.cost[col] = cost;
                }
            }
        }
        for m in moves.iter().rev() {
            match *m {
                Move::RowToZero { row, from } => {
                    if self.row_scope[row] != Some(RowScope::Zero) {
                        return Err(corrupt(format!("row {row} is not a block-0 row")));
                    }
                    match from {
                        RowScope::Local(b) if !self.owns(b) => {
                            self.row_scope[row] = None;
                            self.row_alive[row] = false;
                            self.y[row] = 0.0;
                        }
                        _ => self.row_scope[row] = Some(from),
                    }
                }
                Move::RowToBlock { .. } | Move::ColToBlock { .. } => {}
                Move::ColToZero { col, from } => {
                    if self.col_block[col] != Some(0) {
                        return Err(corrupt(format!("column {col} is not a linking column")));
                    }
                    if self.owns(from) {
                        self.col_block[col] = Some(from);
                    } else {
                        self.col_block[col] = None;
                        self.col_alive[col] = false;
                        self.x[col] = 0.0;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Undoes this rank's stack starting from the reduced solution and returns
/// the solution of the original problem. Collective; every rank returns the
/// same full solution.
pub fn run_postsolve(
    lp: &LpProblem,
    stack: &PostsolveStack,
    reduced: &PrimalDualSolution,
    comm: &Communicator,
) -> Result<PrimalDualSolution, PostsolveError> {
    let ids = lp.id_space();
    if stack.ids != ids || stack.rank != comm.rank() || stack.nranks != comm.size() {
        return Err(PostsolveError::Mismatch(format!(
            "stack for rank {}/{} over {:?} does not fit rank {}/{} over {:?}",
            stack.rank,
            stack.nranks,
            stack.ids,
            comm.rank(),
            comm.size(),
            ids
        )));
    }
    if reduced.x.len() != ids.n_cols || reduced.y.len() != ids.n_rows() {
        return Err(PostsolveError::Mismatch("reduced solution does not cover the id space".into()));
    }
    let mut rp = Replay {
        comm,
        columns: lp.columns(),
        own: blocks_of_rank(comm.rank(), stack.n_blocks, comm.size()),
        row_scope: stack.row_scope.clone(),
        row_alive: stack.row_alive.clone(),
        col_block: stack.col_block.clone(),
        col_alive: stack.col_alive.clone(),
        cost: stack.costs.clone(),
        x: vec![0.0; ids.n_cols],
        y: vec![0.0; ids.n_rows()],
        err: None,
    };
    for j in 0..ids.n_cols {
        if rp.col_block[j].is_some() && rp.col_alive[j] {
            rp.x[j] = reduced.x[j];
        }
    }
    for r in 0..ids.n_rows() {
        if rp.row_present(r) && rp.row_alive[r] {
            rp.y[r] = reduced.y[r];
        }
    }
    let mut global = false;
    for e in stack.entries.iter().rev() {
        if let StackEntry::SyncEvent { layout } = e {
            global = !global;
            let layouts = comm.allgather_one(*layout);
            if rp.err.is_none() && layouts.iter().any(|l| l != layout) {
                rp.err = Some(corrupt(format!("synchronization layouts differ across ranks: {layouts:?}")));
            }
            if let Some(err) = comm.allgather_one(rp.err.clone()).into_iter().flatten().next() {
                return Err(err);
            }
            continue;
        }
        if rp.err.is_some() {
            // keep taking part in the collectives until the next event
            match e {
                StackEntry::SingletonRow { col, .. } | StackEntry::BoundTightened { col, .. } if global => {
                    rp.reduced_cost(*col, true);
                }
                StackEntry::PermutationMove { moves } => rp.undo_moves(moves)?,
                _ => {}
            }
            continue;
        }
        if let Err(err) = rp.undo(e, global) {
            rp.err = Some(err);
        }
    }
    if let Some(err) = comm.allgather_one(rp.err.clone()).into_iter().flatten().next() {
        return Err(err);
    }
    finish(lp, rp)
}

fn finish(lp: &LpProblem, rp: Replay<'_>) -> Result<PrimalDualSolution, PostsolveError> {
    let comm = rp.comm;
    let rank0 = comm.rank() == 0;
    let linking: Vec<usize> = (0..lp.n_cols()).filter(|&j| rp.col_block[j] == Some(0)).collect();
    let parts: Vec<f64> = linking.iter().map(|&j| rp.partial_dot(j, rank0)).collect();
    let dots = comm.allreduce(&parts, &ReduceOp::<f64>::sum());
    let mut z_link = vec![0.0; lp.n_cols()];
    for (&j, d) in linking.iter().zip(dots) {
        z_link[j] = lp.vars[j].cost - d;
    }
    let mut cols = Vec::new();
    for (j, block) in rp.col_block.iter().enumerate() {
        match block {
            Some(0) if rank0 => cols.push((j, rp.col_alive[j], rp.x[j], z_link[j])),
            Some(b) if *b != 0 => cols.push((j, rp.col_alive[j], rp.x[j], lp.vars[j].cost - rp.partial_dot(j, true))),
            _ => {}
        }
    }
    let rows: Vec<(usize, bool, f64)> = (0..lp.n_rows())
        .filter(|&r| match rp.row_scope[r] {
            Some(RowScope::Local(_)) => true,
            Some(_) => rank0,
            None => false,
        })
        .map(|r| (r, rp.row_alive[r], rp.y[r]))
        .collect();
    let cols = comm.allgather(cols);
    let rows = comm.allgather(rows);
    let mut sol = PrimalDualSolution::zeros(lp.id_space());
    let mut seen_c = vec![false; lp.n_cols()];
    let mut seen_r = vec![false; lp.n_rows()];
    for (j, alive, x, z) in cols {
        if !alive || std::mem::replace(&mut seen_c[j], true) {
            return Err(corrupt(format!("column {j} not restored exactly once")));
        }
        sol.x[j] = x;
        sol.z[j] = z;
    }
    for (r, alive, y) in rows {
        if !alive || std::mem::replace(&mut seen_r[r], true) {
            return Err(corrupt(format!("row {r} not restored exactly once")));
        }
        sol.y[r] = y;
    }
    if let Some(j) = seen_c.iter().position(|s| !s) {
        return Err(corrupt(format!("column {j} missing after postsolve")));
    }
    if let Some(r) = seen_r.iter().position(|s| !s) {
        return Err(corrupt(format!("row {r} missing after postsolve")));
    }
    Ok(sol)
}

/// Runs [`run_postsolve`] on one simulated rank per stack.
pub fn postsolve(
    lp: &LpProblem,
    stacks: &[PostsolveStack],
    reduced: &PrimalDualSolution,
    mode: ExecMode,
) -> Result<PrimalDualSolution, PostsolveError> {
    if stacks.is_empty() {
        return Err(PostsolveError::Mismatch("no postsolve stacks".into()));
    }
    let outs = World::new(stacks.len(), mode).run(|comm| run_postsolve(lp, &stacks[comm.rank()], reduced, comm))?;
    outs.into_iter().next().expect("world has a rank")
}
