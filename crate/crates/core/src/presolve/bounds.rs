//! One-row activity-based bound tightening.

use crate::error::PresolveError;
use crate::postsolve::{Side, StackEntry};
use crate::work::{BoundCandidate, RankProblem, RowScope};

use super::PresolveConfig;

/// Largest magnitude accepted for a derived bound.
const MAX_BOUND: f64 = 1e8;

/// Bounds on `x_j` implied by `d <= a x_j + rest <= f` given the residual
/// activity range of `rest`.
pub fn implied_bounds(a: f64, d: f64, f: f64, rest_min: Option<f64>, rest_max: Option<f64>) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if let Some(m) = rest_min.filter(|_| f.is_finite()) {
        let v = (f - m) / a;
        if a > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
    }
    if let Some(m) = rest_max.filter(|_| d.is_finite()) {
        let v = (d - m) / a;
        if a > 0.0 {
            lo = v;
        } else {
            hi = v;
        }
    }
    (lo, hi)
}

fn worth_it(old: f64, new: f64, range: f64) -> bool {
    if old.is_infinite() {
        return new.abs() <= MAX_BOUND;
    }
    (new - old).abs() > 1e-3 * range.max(1.0)
}

pub fn run(w: &mut RankProblem, cfg: &PresolveConfig) {
    for r in w.live_rows() {
        if w.failed() {
            return;
        }
        let entries = w.row(r).entries.clone();
        for (j, a) in entries {
            if a.abs() < 1e-9 || !w.col_alive(j) {
                continue;
            }
            let row = w.row(r);
            let (d, f) = (row.lower, row.upper);
            let act = w.activity(r);
            let c = w.col(j);
            let (l, u, block) = (c.lower, c.upper, c.block);
            // dual shifts onto linking rows would have to be merged across ranks
            if block != 0 && row.scope == RowScope::Link {
                continue;
            }
            let (lo, hi) = implied_bounds(a, d, f, act.residual_min(a, l, u), act.residual_max(a, l, u));
            let range = u - l;
            for (side, v) in [(Side::Lower, lo), (Side::Upper, hi)] {
                let (cur, other) = match side {
                    Side::Lower => (w.col(j).lower, w.col(j).upper),
                    Side::Upper => (w.col(j).upper, w.col(j).lower),
                };
                let tighter = match side {
                    Side::Lower => v > cur,
                    Side::Upper => v < cur,
                };
                if !v.is_finite() || !tighter || !worth_it(cur, v, range) {
                    continue;
                }
                let crossed = match side {
                    Side::Lower => v > other,
                    Side::Upper => v < other,
                };
                let mut v = v;
                if crossed {
                    if (v - other).abs() > cfg.feastol * other.abs().max(1.0) {
                        let msg = format!(
                            "row {} gives {:?} bound {v} for column {} beyond {other}",
                            w.row(r).name,
                            side,
                            w.col(j).name
                        );
                        w.fail(PresolveError::Infeasible(msg));
                        return;
                    }
                    v = other;
                }
                if block == 0 {
                    w.bound_cands.push(BoundCandidate { col: j, side, value: v, row: r, coef: a });
                    continue;
                }
                let (nl, nu) = match side {
                    Side::Lower => (v, w.col(j).upper),
                    Side::Upper => (w.col(j).lower, v),
                };
                w.set_bounds(j, nl, nu);
                w.tally.bounds_tightened += 1;
                w.row_mut(r).dual_locked = true;
                w.push_local(StackEntry::BoundTightened { col: j, side, old: cur, new: v, row: r, coef: a });
            }
        }
    }
}
