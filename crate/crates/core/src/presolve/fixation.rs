use crate::postsolve::StackEntry;
use crate::work::RankProblem;

use super::PresolveConfig;

pub fn nearly_fixed(lower: f64, upper: f64, cfg: &PresolveConfig) -> bool {
    lower.is_finite() && upper.is_finite() && upper - lower <= cfg.feastol * lower.abs().max(1.0)
}

/// Removes columns whose bounds (nearly) coincide, fixing them at the lower bound.
pub fn run(w: &mut RankProblem, cfg: &PresolveConfig) {
    for j in w.live_cols() {
        let c = w.col(j);
        if !nearly_fixed(c.lower, c.upper, cfg) {
            continue;
        }
        let entry = StackEntry::FixedVar { col: j, value: c.lower, cost: c.cost, entries: c.entries.clone() };
        let (global, value) = (c.block == 0, c.lower);
        w.push(global, entry);
        w.fix_col(j, value);
    }
}
