//! Linearly dependent equality rows, first inside each block and then among
//! the block-0 rows.

use crate::comm::Communicator;
use crate::error::PresolveError;
use crate::postsolve::{Move, StackEntry};
use crate::work::{RankProblem, Row, RowScope};

use super::elim::dependent_rows;
use super::permute::equality_rows;
use super::PresolveConfig;

/// What a dependent local row turns into once its block part cancels.
enum Outcome {
    Removed,
    Zero(Row),
}

fn combine(w: &RankProblem, ids: &[usize], t: usize, weights: &[(usize, f64)], cfg: &PresolveConfig) -> Result<Outcome, String> {
    let mut sum: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
    let (mut rhs, mut rhs_scale, mut scale) = (0.0, 0.0, 0.0f64);
    for &(q, wq) in weights {
        let row = w.row(ids[q]);
        rhs += wq * row.lower;
        rhs_scale += (wq * row.lower).abs();
        for &(j, a) in &row.entries {
            scale = scale.max((wq * a).abs());
            if w.col(j).block == 0 {
                let e = sum.entry(j).or_default();
                e.0 += wq * a;
                e.1 += (wq * a).abs();
            }
        }
    }
    let entries: Vec<(usize, f64)> =
        sum.into_iter().filter(|(_, (v, s))| v.abs() > cfg.zero_tol * s.max(scale)).map(|(j, (v, _))| (j, v)).collect();
    let target = w.row(t);
    if entries.is_empty() {
        if rhs.abs() <= cfg.feastol * rhs_scale.max(1.0) {
            return Ok(Outcome::Removed);
        }
        return Err(format!("dependent equality row {} has inconsistent right-hand side {rhs}", target.name));
    }
    Ok(Outcome::Zero(Row {
        scope: RowScope::Zero,
        lower: rhs,
        upper: rhs,
        entries,
        dual_locked: false,
        ..target.clone()
    }))
}

pub fn run(w: &mut RankProblem, cfg: &PresolveConfig, comm: &Communicator) {
    let mut to_zero: Vec<(usize, usize, Row)> = Vec::new();
    for b in w.own_blocks.clone() {
        let ids = equality_rows(w, RowScope::Local(b));
        let parts: Vec<Vec<(usize, f64)>> = ids
            .iter()
            .map(|&r| w.row(r).entries.iter().copied().filter(|&(j, _)| w.col(j).block == b).collect())
            .collect();
        for dep in dependent_rows(&parts, cfg.pivot_threshold, cfg.zero_tol) {
            if w.failed() {
                break;
            }
            let t = ids[dep.row];
            let weights: Vec<(usize, f64)> = dep.weights.iter().map(|&(q, v)| (ids[q], v)).collect();
            match combine(w, &ids, t, &dep.weights, cfg) {
                Err(msg) => w.fail(PresolveError::Infeasible(msg)),
                Ok(Outcome::Removed) => {
                    w.push_local(StackEntry::LinDepCombination { target: t, removed: true, weights });
                    w.delete_row(t);
                }
                Ok(Outcome::Zero(row)) => {
                    w.push_local(StackEntry::LinDepCombination { target: t, removed: false, weights });
                    to_zero.push((t, b, row));
                }
            }
        }
    }
    let moved = comm.allgather(to_zero);
    if !moved.is_empty() {
        let mut moves = Vec::new();
        for (t, b, row) in moved {
            if w.owns(b) {
                w.drop_row(t);
            }
            w.insert_row(t, row);
            moves.push(Move::RowToZero { row: t, from: RowScope::Local(b) });
        }
        if w.counts_replicated() {
            w.tally.rows_moved += moves.len();
        }
        w.push_global(StackEntry::PermutationMove { moves });
        w.rebuild_tracking(comm);
    }
    if w.failed() {
        return;
    }
    let ids = equality_rows(w, RowScope::Zero);
    let parts: Vec<Vec<(usize, f64)>> = ids.iter().map(|&r| w.row(r).entries.clone()).collect();
    for dep in dependent_rows(&parts, cfg.pivot_threshold, cfg.zero_tol) {
        let t = ids[dep.row];
        let (mut rhs, mut scale) = (0.0, 0.0);
        for &(q, wq) in &dep.weights {
            rhs += wq * w.row(ids[q]).lower;
            scale += (wq * w.row(ids[q]).lower).abs();
        }
        if rhs.abs() > cfg.feastol * f64::max(scale, 1.0) {
            let name = w.row(t).name.clone();
            w.fail(PresolveError::Infeasible(format!("dependent equality row {name} has inconsistent right-hand side {rhs}")));
            return;
        }
        let weights = dep.weights.iter().map(|&(q, v)| (ids[q], v)).collect();
        w.push_global(StackEntry::LinDepCombination { target: t, removed: true, weights });
        w.delete_row(t);
    }
}
