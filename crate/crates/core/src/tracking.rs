//! Row activities and nonzero counters, maintained incrementally.
//!
//! Activity bounds follow the usual reading: the minimum activity of a row
//! sums `a_ij * l_j` over positive and `a_ij * u_j` over negative
//! coefficients, the maximum the other way round. Finite parts are kept as
//! exact sums next to counters of infinite contributions.
//!
//! Routing: contributions of replicated entries (linking column in a block-0
//! or linking row) are applied on every rank directly. A local column's share
//! of a linking row and a local row's share of a linking column's counter go
//! to a per-rank buffer and reach the shared record at the next
//! [`RankProblem::sync_linking`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::comm::{Communicator, ReduceOp};
use crate::exact::ExactSum;
use crate::work::{RankProblem, RowScope};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Activity {
    pub min: ExactSum,
    pub max: ExactSum,
    pub min_inf: i64,
    pub max_inf: i64,
}

impl Activity {
    /// Adds (`sign = 1`) or removes (`sign = -1`) the contribution of `a * x`
    /// with `x` in `[l, u]`.
    pub fn add_term(&mut self, a: f64, l: f64, u: f64, sign: i64) {
        let (lo, hi) = if a > 0.0 { (l, u) } else { (u, l) };
        if lo.is_infinite() {
            self.min_inf += sign;
        } else {
            self.min.add(sign as f64 * (a * lo));
        }
        if hi.is_infinite() {
            self.max_inf += sign;
        } else {
            self.max.add(sign as f64 * (a * hi));
        }
    }

    pub fn merge(&mut self, other: &Activity) {
        self.min.merge(&other.min);
        self.max.merge(&other.max);
        self.min_inf += other.min_inf;
        self.max_inf += other.max_inf;
    }

    pub fn min_value(&self) -> f64 {
        if self.min_inf > 0 {
            f64::NEG_INFINITY
        } else {
            self.min.value()
        }
    }

    pub fn max_value(&self) -> f64 {
        if self.max_inf > 0 {
            f64::INFINITY
        } else {
            self.max.value()
        }
    }

    /// Minimum activity without the term `a * x_j`, `None` if still unbounded.
    pub fn residual_min(&self, a: f64, l: f64, u: f64) -> Option<f64> {
        let b = if a > 0.0 { l } else { u };
        residual(&self.min, self.min_inf, a, b)
    }

    pub fn residual_max(&self, a: f64, l: f64, u: f64) -> Option<f64> {
        let b = if a > 0.0 { u } else { l };
        residual(&self.max, self.max_inf, a, b)
    }

    pub fn same_as(&self, other: &Activity) -> bool {
        self.min_inf == other.min_inf
            && self.max_inf == other.max_inf
            && self.min.value().to_bits() == other.min.value().to_bits()
            && self.max.value().to_bits() == other.max.value().to_bits()
    }
}

fn residual(sum: &ExactSum, inf: i64, a: f64, bound: f64) -> Option<f64> {
    if bound.is_infinite() {
        (inf == 1).then(|| sum.value())
    } else if inf == 0 {
        let mut s = sum.clone();
        s.sub(a * bound);
        Some(s.value())
    } else {
        None
    }
}

/// Synchronized records plus the rank's pending linking deltas.
#[derive(Clone, Debug, Default)]
pub struct Tracking {
    pub act: Vec<Activity>,
    pub row_nnz: Vec<i64>,
    pub col_nnz: Vec<i64>,
    pub buf_act: BTreeMap<usize, Activity>,
    pub buf_row_nnz: BTreeMap<usize, i64>,
    /// Amount to subtract from both bounds of a linking row.
    pub buf_rhs: BTreeMap<usize, f64>,
    pub buf_col_nnz: BTreeMap<usize, i64>,
}

impl Tracking {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            act: vec![Activity::default(); n_rows],
            row_nnz: vec![0; n_rows],
            col_nnz: vec![0; n_cols],
            ..Default::default()
        }
    }

    pub fn buffers_empty(&self) -> bool {
        self.buf_act.is_empty() && self.buf_row_nnz.is_empty() && self.buf_rhs.is_empty() && self.buf_col_nnz.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
struct LinkDelta {
    row: Option<usize>,
    act: Activity,
    nnz: i64,
    rhs: f64,
}

fn link_delta_op() -> ReduceOp<LinkDelta> {
    ReduceOp::new("link-delta", LinkDelta::default(), false, |a: &LinkDelta, b: &LinkDelta| {
        let row = match (a.row, b.row) {
            (Some(x), Some(y)) => {
                assert_eq!(x, y, "linking buffer layout differs across ranks");
                Some(x)
            }
            (x, y) => x.or(y),
        };
        let mut act = a.act.clone();
        act.merge(&b.act);
        LinkDelta { row, act, nnz: a.nnz + b.nnz, rhs: a.rhs + b.rhs }
    })
}

impl RankProblem {
    pub(crate) fn row_buffered(scope: RowScope, col_block: usize) -> bool {
        scope == RowScope::Link && col_block != 0
    }

    pub(crate) fn col_buffered(scope: RowScope, col_block: usize) -> bool {
        col_block == 0 && matches!(scope, RowScope::Local(_))
    }

    /// Flushes buffered linking deltas into the shared records. Collective.
    pub fn sync_linking(&mut self, comm: &Communicator) {
        let rows = self.alive_link_rows();
        let deltas: Vec<LinkDelta> = rows
            .iter()
            .map(|&r| LinkDelta {
                row: Some(r),
                act: self.track.buf_act.remove(&r).unwrap_or_default(),
                nnz: self.track.buf_row_nnz.remove(&r).unwrap_or(0),
                rhs: self.track.buf_rhs.remove(&r).unwrap_or(0.0),
            })
            .collect();
        let total = comm.allreduce(&deltas, &link_delta_op());
        for (&r, d) in rows.iter().zip(&total) {
            self.track.act[r].merge(&d.act);
            self.track.row_nnz[r] += d.nnz;
            if d.rhs != 0.0 {
                let row = self.row_mut(r);
                row.lower -= d.rhs;
                row.upper -= d.rhs;
            }
        }
        let cols = self.alive_linking_cols();
        let counts: Vec<i64> = cols.iter().map(|&j| self.track.buf_col_nnz.remove(&j).unwrap_or(0)).collect();
        let counts = comm.allreduce(&counts, &ReduceOp::<i64>::sum());
        for (&j, d) in cols.iter().zip(counts) {
            self.track.col_nnz[j] += d;
        }
        // deltas of entities deleted since the last sync are dropped
        self.track.buf_act.clear();
        self.track.buf_row_nnz.clear();
        self.track.buf_rhs.clear();
        self.track.buf_col_nnz.clear();
    }

    /// Tracking state recomputed from the current entries. Collective.
    pub fn fresh_tracking(&self, comm: &Communicator) -> Tracking {
        let mut t = Tracking::new(self.rows.len(), self.cols.len());
        let mut partial: BTreeMap<usize, (Activity, i64)> = BTreeMap::new();
        for (r, row) in self.rows.iter().enumerate() {
            let Some(row) = row else { continue };
            if !row.alive {
                continue;
            }
            for &(j, a) in &row.entries {
                let col = self.col(j);
                if Self::row_buffered(row.scope, col.block) {
                    let e = partial.entry(r).or_default();
                    e.0.add_term(a, col.lower, col.upper, 1);
                    e.1 += 1;
                } else {
                    t.act[r].add_term(a, col.lower, col.upper, 1);
                    t.row_nnz[r] += 1;
                }
            }
        }
        let rows = self.alive_link_rows();
        let deltas: Vec<LinkDelta> = rows
            .iter()
            .map(|&r| {
                let (act, nnz) = partial.remove(&r).unwrap_or_default();
                LinkDelta { row: Some(r), act, nnz, rhs: 0.0 }
            })
            .collect();
        let total = comm.allreduce(&deltas, &link_delta_op());
        for (&r, d) in rows.iter().zip(&total) {
            t.act[r].merge(&d.act);
            t.row_nnz[r] += d.nnz;
        }
        let mut col_partial: BTreeMap<usize, i64> = BTreeMap::new();
        for (j, col) in self.cols.iter().enumerate() {
            let Some(col) = col else { continue };
            if !col.alive {
                continue;
            }
            for &(r, _) in &col.entries {
                if Self::col_buffered(self.row(r).scope, col.block) {
                    *col_partial.entry(j).or_default() += 1;
                } else {
                    t.col_nnz[j] += 1;
                }
            }
        }
        let cols = self.alive_linking_cols();
        let counts: Vec<i64> = cols.iter().map(|j| col_partial.get(j).copied().unwrap_or(0)).collect();
        let counts = comm.allreduce(&counts, &ReduceOp::<i64>::sum());
        for (&j, d) in cols.iter().zip(counts) {
            t.col_nnz[j] += d;
        }
        t
    }

    pub fn rebuild_tracking(&mut self, comm: &Communicator) {
        self.track = self.fresh_tracking(comm);
    }

    /// Differences between the maintained and the recomputed state for live
    /// rows and columns. Collective; call right after [`Self::sync_linking`].
    pub fn tracking_mismatches(&self, comm: &Communicator) -> Vec<String> {
        let fresh = self.fresh_tracking(comm);
        let mut out = Vec::new();
        if !self.track.buffers_empty() {
            out.push("linking buffers not empty".to_string());
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !matches!(row, Some(row) if row.alive) {
                continue;
            }
            if !self.track.act[r].same_as(&fresh.act[r]) {
                out.push(format!(
                    "row {r}: activity [{}, {}] (inf {}, {}) vs fresh [{}, {}] (inf {}, {})",
                    self.track.act[r].min.value(),
                    self.track.act[r].max.value(),
                    self.track.act[r].min_inf,
                    self.track.act[r].max_inf,
                    fresh.act[r].min.value(),
                    fresh.act[r].max.value(),
                    fresh.act[r].min_inf,
                    fresh.act[r].max_inf
                ));
            }
            if self.track.row_nnz[r] != fresh.row_nnz[r] {
                out.push(format!("row {r}: nnz {} vs fresh {}", self.track.row_nnz[r], fresh.row_nnz[r]));
            }
        }
        for (j, col) in self.cols.iter().enumerate() {
            if matches!(col, Some(c) if c.alive) && self.track.col_nnz[j] != fresh.col_nnz[j] {
                out.push(format!("col {j}: nnz {} vs fresh {}", self.track.col_nnz[j], fresh.col_nnz[j]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_x_minus_three_y() {
        let mut a = Activity::default();
        a.add_term(2.0, 0.0, 1.0, 1);
        a.add_term(-3.0, 0.0, 2.0, 1);
        assert_eq!((a.min_value(), a.max_value()), (-6.0, 2.0));
        assert_eq!((a.min_inf, a.max_inf), (0, 0));
    }

    #[test]
    fn infinite_upper_counts() {
        let mut a = Activity::default();
        a.add_term(1.0, 0.0, 3.0, 1);
        a.add_term(1.0, 0.0, f64::INFINITY, 1);
        assert_eq!(a.max.value(), 3.0);
        assert_eq!(a.max_inf, 1);
        assert_eq!(a.residual_max(1.0, 0.0, f64::INFINITY), Some(3.0));
        assert_eq!(a.residual_max(1.0, 0.0, 3.0), None);
    }

    #[test]
    fn tighten_and_remove() {
        let mut a = Activity::default();
        a.add_term(2.0, 0.0, 5.0, 1);
        a.add_term(1.0, 0.0, 1.0, 1);
        a.add_term(2.0, 0.0, 5.0, -1);
        a.add_term(2.0, 0.0, 3.0, 1);
        assert_eq!(a.max_value(), 7.0);
        let mut b = Activity::default();
        b.add_term(1.0, f64::NEG_INFINITY, 2.0, 1);
        b.add_term(1.0, f64::NEG_INFINITY, 2.0, -1);
        b.add_term(1.0, 0.0, 2.0, 1);
        assert_eq!((b.min_inf, b.min_value()), (0, 0.0));
    }
}
