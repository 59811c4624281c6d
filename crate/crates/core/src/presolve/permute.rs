//! Moves rows and columns between the linking part and the blocks so that the
//! linking part only keeps what actually couples two or more blocks.

use std::collections::BTreeSet;

use crate::comm::{Communicator, ReduceOp};
use crate::model::RowKind;
use crate::postsolve::{Move, StackEntry};
use crate::work::{Col, RankProblem, Row, RowScope};

/// Safety cap on permutation sweeps; each sweep only shrinks the linking part.
const MAX_SWEEPS: usize = 64;

/// Per-entity (number of distinct blocks seen, largest block id) over all ranks.
fn block_census(sets: Vec<BTreeSet<usize>>, comm: &Communicator) -> Vec<(usize, usize)> {
    let counts: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let maxes: Vec<usize> = sets.iter().map(|s| s.iter().next_back().copied().unwrap_or(0)).collect();
    let counts = comm.allreduce(&counts, &ReduceOp::<usize>::sum());
    let maxes = comm.allreduce(&maxes, &ReduceOp::<usize>::max());
    counts.into_iter().zip(maxes).collect()
}

fn link_rows_pass(w: &mut RankProblem, comm: &Communicator, moves: &mut Vec<Move>) {
    let rows = w.alive_link_rows();
    let sets = rows
        .iter()
        .map(|&r| w.row(r).entries.iter().map(|&(j, _)| w.col(j).block).filter(|&b| b != 0).collect())
        .collect();
    for (r, (count, block)) in rows.into_iter().zip(block_census(sets, comm)) {
        match count {
            0 if w.track.row_nnz[r] > 0 => {
                w.row_mut(r).scope = RowScope::Zero;
                moves.push(Move::RowToZero { row: r, from: RowScope::Link });
            }
            1 => {
                if w.owns(block) {
                    w.row_mut(r).scope = RowScope::Local(block);
                } else {
                    w.drop_row(r);
                }
                moves.push(Move::RowToBlock { row: r, block });
            }
            _ => {}
        }
    }
}

fn local_rows_pass(w: &mut RankProblem, comm: &Communicator, moves: &mut Vec<Move>) {
    let mine: Vec<(usize, usize, Row)> = w
        .live_rows()
        .into_iter()
        .filter_map(|r| {
            let row = w.row(r);
            let RowScope::Local(b) = row.scope else { return None };
            let only_x0 = !row.entries.is_empty() && row.entries.iter().all(|&(j, _)| w.col(j).block == 0);
            only_x0.then(|| (r, b, Row { scope: RowScope::Zero, ..row.clone() }))
        })
        .collect();
    for (r, b, row) in comm.allgather(mine) {
        if w.owns(b) {
            w.row_mut(r).scope = RowScope::Zero;
        } else {
            w.insert_row(r, row);
        }
        moves.push(Move::RowToZero { row: r, from: RowScope::Local(b) });
    }
}

fn linking_cols_pass(w: &mut RankProblem, comm: &Communicator, moves: &mut Vec<Move>) {
    let cols = w.alive_linking_cols();
    let in_zero: Vec<bool> =
        cols.iter().map(|&j| w.col(j).entries.iter().any(|&(r, _)| w.row(r).scope == RowScope::Zero)).collect();
    let sets = cols
        .iter()
        .map(|&j| {
            w.col(j)
                .entries
                .iter()
                .filter_map(|&(r, _)| match w.row(r).scope {
                    RowScope::Local(b) => Some(b),
                    _ => None,
                })
                .collect()
        })
        .collect();
    for ((j, zero), (count, block)) in cols.into_iter().zip(in_zero).zip(block_census(sets, comm)) {
        if count != 1 || zero {
            continue;
        }
        if w.owns(block) {
            w.col_mut(j).block = block;
        } else {
            w.drop_col(j);
        }
        moves.push(Move::ColToBlock { col: j, block });
    }
}

fn local_cols_pass(w: &mut RankProblem, comm: &Communicator, moves: &mut Vec<Move>) {
    let mine: Vec<(usize, usize, Col)> = w
        .live_cols()
        .into_iter()
        .filter_map(|j| {
            let c = w.col(j);
            let only_link = c.block != 0
                && !c.entries.is_empty()
                && c.entries.iter().all(|&(r, _)| w.row(r).scope == RowScope::Link);
            only_link.then(|| (j, c.block, Col { block: 0, ..c.clone() }))
        })
        .collect();
    for (j, b, col) in comm.allgather(mine) {
        if w.owns(b) {
            w.col_mut(j).block = 0;
        } else {
            w.insert_col(j, col);
        }
        moves.push(Move::ColToZero { col: j, from: b });
    }
}

pub fn run(w: &mut RankProblem, comm: &Communicator) {
    let mut moves = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let before = moves.len();
        link_rows_pass(w, comm, &mut moves);
        local_rows_pass(w, comm, &mut moves);
        linking_cols_pass(w, comm, &mut moves);
        local_cols_pass(w, comm, &mut moves);
        if moves.len() == before {
            break;
        }
        w.rebuild_tracking(comm);
    }
    if moves.is_empty() {
        return;
    }
    if w.counts_replicated() {
        for m in &moves {
            match m {
                Move::RowToZero { .. } | Move::RowToBlock { .. } => w.tally.rows_moved += 1,
                _ => w.tally.cols_moved += 1,
            }
        }
    }
    w.push_global(StackEntry::PermutationMove { moves });
}

/// Equality rows of `scope`, used by the dependency check.
pub(crate) fn equality_rows(w: &RankProblem, scope: RowScope) -> Vec<usize> {
    w.live_rows().into_iter().filter(|&r| w.row(r).scope == scope && w.row(r).kind == RowKind::Equality).collect()
}
