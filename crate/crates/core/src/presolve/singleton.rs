//! Singleton rows become bounds; singleton columns in equality rows are
//! substituted out when implied free.

use crate::error::PresolveError;
use crate::model::RowKind;
use crate::postsolve::StackEntry;
use crate::work::{RankProblem, RowScope};

use super::PresolveConfig;

pub fn rows(w: &mut RankProblem, cfg: &PresolveConfig) {
    for r in w.live_rows() {
        if w.failed() {
            return;
        }
        let row = w.row(r);
        if row.entries.len() != 1 {
            continue;
        }
        let (j, a) = row.entries[0];
        let block = w.col(j).block;
        // the column must live in the row's own scope
        let global = match row.scope {
            RowScope::Zero if block == 0 => true,
            RowScope::Local(b) if block == b => false,
            _ => continue,
        };
        let (d, f, kind, name) = (row.lower, row.upper, row.kind, row.name.clone());
        let c = w.col(j);
        let (l, u) = (c.lower, c.upper);
        let (mut lo, mut hi) = if a > 0.0 { (d / a, f / a) } else { (f / a, d / a) };
        if kind == RowKind::Equality {
            let v = d / a;
            lo = v;
            hi = v;
        }
        let nl = l.max(lo);
        let nu = u.min(hi);
        let slack = cfg.feastol * nl.abs().max(nu.abs()).max(1.0);
        if nl > nu + slack {
            let msg = format!("singleton row {name} implies [{lo}, {hi}] for column {} with bounds [{l}, {u}]", c.name);
            w.fail(PresolveError::Infeasible(msg));
            return;
        }
        let (nl, nu) = if nl > nu {
            if lo > l { (nu, nu) } else { (nl, nl) }
        } else {
            (nl, nu)
        };
        let eq = kind == RowKind::Equality;
        let entry = StackEntry::SingletonRow {
            row: r,
            col: j,
            coef: a,
            old_lower: l,
            old_upper: u,
            lower_from_row: eq || nl > l,
            upper_from_row: eq || nu < u,
        };
        if nl > l || nu < u {
            w.set_bounds(j, nl, nu);
            if w.col_counted(block) {
                w.tally.bounds_tightened += 1;
            }
        }
        w.push(global, entry);
        w.delete_row(r);
    }
}

/// Bounds on `x_j` implied by equality row `r` through the other columns.
fn implied_range(w: &RankProblem, r: usize, a: f64, l: f64, u: f64) -> (f64, f64) {
    let act = w.activity(r);
    let b = w.row(r).lower;
    let rest_min = act.residual_min(a, l, u).unwrap_or(f64::NEG_INFINITY);
    let rest_max = act.residual_max(a, l, u).unwrap_or(f64::INFINITY);
    let (p, q) = ((b - rest_max) / a, (b - rest_min) / a);
    if a > 0.0 {
        (p, q)
    } else {
        (q, p)
    }
}

pub fn cols(w: &mut RankProblem, _cfg: &PresolveConfig) {
    for j in w.live_cols() {
        if !w.col_alive(j) {
            continue;
        }
        let c = w.col(j);
        if c.entries.len() != 1 {
            continue;
        }
        if c.block == 0 && w.track.col_nnz[j] != 1 {
            continue;
        }
        let (r, a) = c.entries[0];
        let (l, u, cost, block) = (c.lower, c.upper, c.cost, c.block);
        let row = w.row(r);
        if row.kind != RowKind::Equality || row.dual_locked || a.abs() < 1e-9 {
            continue;
        }
        let ok_scope = match row.scope {
            RowScope::Zero => block == 0,
            RowScope::Local(b) => b == block && row.entries.iter().all(|&(k, _)| w.col(k).block == b),
            RowScope::Link => false,
        };
        if !ok_scope {
            continue;
        }
        let (lo, hi) = implied_range(w, r, a, l, u);
        if !(lo >= l && hi <= u) {
            continue;
        }
        let global = block == 0;
        let row = w.row(r);
        let b = row.lower;
        let row_entries = row.entries.clone();
        w.push(global, StackEntry::SubstitutedCol { col: j, row: r, coef: a, rhs: b, row_entries: row_entries.clone(), cost });
        if cost != 0.0 {
            for &(k, ak) in &row_entries {
                if k != j {
                    w.col_mut(k).cost -= cost * ak / a;
                }
            }
            if w.col_counted(block) {
                w.offset += cost * b / a;
            }
        }
        w.delete_row(r);
        w.delete_empty_col(j);
    }
}
