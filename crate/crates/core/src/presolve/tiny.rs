use crate::work::RankProblem;

use super::PresolveConfig;

/// Whether an entry is small enough to drop outright: the largest change it
/// can make to its row's activity stays two orders below `feastol`.
pub fn removable(a: f64, lower: f64, upper: f64, cfg: &PresolveConfig) -> bool {
    lower.is_finite()
        && upper.is_finite()
        && a.abs() <= cfg.tiny_entry_tol
        && a.abs() * lower.abs().max(upper.abs()).max(upper - lower) <= 0.01 * cfg.feastol
}

pub fn run(w: &mut RankProblem, cfg: &PresolveConfig) {
    for r in w.live_rows() {
        let doomed: Vec<usize> = w
            .row(r)
            .entries
            .iter()
            .filter(|&&(j, a)| {
                let c = w.col(j);
                removable(a, c.lower, c.upper, cfg)
            })
            .map(|e| e.0)
            .collect();
        for j in doomed {
            w.remove_entry(r, j);
        }
    }
}
