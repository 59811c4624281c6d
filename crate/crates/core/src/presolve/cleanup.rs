//! Empty columns, redundant rows and forcing rows.

use crate::error::PresolveError;
use crate::postsolve::{Side, StackEntry};
use crate::work::{BoundCandidate, RankProblem, RowScope};

use super::PresolveConfig;

fn tol(cfg: &PresolveConfig, bound: f64) -> f64 {
    cfg.feastol * bound.abs().max(1.0)
}

pub fn run(w: &mut RankProblem, cfg: &PresolveConfig) {
    empty_cols(w);
    if w.failed() {
        return;
    }
    // replicated rows first, decided on synchronized records only
    let live = w.live_rows();
    let (replicated, local): (Vec<usize>, Vec<usize>) =
        live.into_iter().partition(|&r| !matches!(w.row(r).scope, RowScope::Local(_)));
    for r in replicated.into_iter().chain(local) {
        if w.failed() {
            return;
        }
        if w.row_alive(r) {
            check_row(w, r, cfg);
        }
    }
}

fn empty_cols(w: &mut RankProblem) {
    for j in w.live_cols() {
        let c = w.col(j);
        let empty = if c.block == 0 { w.track.col_nnz[j] == 0 } else { c.entries.is_empty() };
        if !empty {
            continue;
        }
        debug_assert!(c.entries.is_empty());
        let value = if c.cost > 0.0 {
            c.lower
        } else if c.cost < 0.0 {
            c.upper
        } else {
            0.0f64.clamp(c.lower, c.upper)
        };
        if value.is_infinite() {
            let msg = format!("empty column {} has improving direction (cost {}) without finite bound", c.name, c.cost);
            w.fail(PresolveError::Unbounded(msg));
            return;
        }
        let entry = StackEntry::FixedVar { col: j, value, cost: c.cost, entries: Vec::new() };
        let global = c.block == 0;
        w.push(global, entry);
        w.fix_col(j, value);
    }
}

fn check_row(w: &mut RankProblem, r: usize, cfg: &PresolveConfig) {
    let row = w.row(r);
    let scope = row.scope;
    let replicated = !matches!(scope, RowScope::Local(_));
    let act = if replicated { w.track.act[r].clone() } else { w.activity(r) };
    let (lo, hi) = (act.min_value(), act.max_value());
    let (d, f) = (row.lower, row.upper);
    if lo > f + tol(cfg, f) || hi < d - tol(cfg, d) {
        let msg = format!("row {} activity [{lo}, {hi}] misses bounds [{d}, {f}]", row.name);
        w.fail(PresolveError::Infeasible(msg));
        return;
    }
    let redundant_lo = d == f64::NEG_INFINITY || lo >= d - tol(cfg, d);
    let redundant_hi = f == f64::INFINITY || hi <= f + tol(cfg, f);
    let is_eq = d == f;
    // a row that supplied a bound keeps its dual; deleting it would lose that
    if redundant_lo && redundant_hi && !is_eq && !row.dual_locked {
        delete_redundant(w, r, replicated);
        return;
    }
    // forcing: the activity interval touches the bound from inside
    let at_min = f.is_finite() && lo.is_finite() && lo >= f - tol(cfg, f);
    let at_max = d.is_finite() && hi.is_finite() && hi <= d + tol(cfg, d);
    let link_local = scope == RowScope::Link && w.row(r).entries.iter().any(|&(j, _)| w.col(j).block != 0);
    if (at_min || at_max) && !link_local {
        force(w, r, at_min, replicated);
    }
}

fn delete_redundant(w: &mut RankProblem, r: usize, global: bool) {
    let row = w.row(r);
    let entry = StackEntry::DeletedRedundantRow { row: r, entries: row.entries.clone(), lower: row.lower, upper: row.upper };
    w.push(global, entry);
    w.delete_row(r);
}

/// Fixes every column of row `r` at the bound attaining the row's minimum
/// (or maximum) activity and removes the row.
fn force(w: &mut RankProblem, r: usize, at_min: bool, global: bool) {
    let entries = w.row(r).entries.clone();
    for (j, a) in entries {
        let c = w.col(j);
        let (l, u, block) = (c.lower, c.upper, c.block);
        let value = if (a > 0.0) == at_min { l } else { u };
        if block == 0 {
            for side in [Side::Lower, Side::Upper] {
                w.bound_cands.push(BoundCandidate { col: j, side, value, row: r, coef: a });
            }
            continue;
        }
        if l == u {
            continue;
        }
        let (side, old) = if value == l { (Side::Upper, u) } else { (Side::Lower, l) };
        w.set_bounds(j, value, value);
        w.tally.bounds_tightened += 1;
        w.push_local(StackEntry::BoundTightened { col: j, side, old, new: value, row: r, coef: a });
    }
    delete_redundant(w, r, global);
}
