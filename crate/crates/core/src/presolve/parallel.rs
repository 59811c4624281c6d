//! Parallel row detection by two-level hashing and the resulting reductions.

use std::collections::BTreeMap;

use crate::comm::{Communicator, ReduceOp};
use crate::error::PresolveError;
use crate::model::RowKind;
use crate::postsolve::StackEntry;
use crate::work::{RankProblem, RowScope};

use super::PresolveConfig;

/// Grid for quantizing normalized coefficients before hashing. Coarser than
/// the verification tolerance so that rounding noise rarely splits a pair.
const HASH_GRID: f64 = 1e-6;

pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn salt(block: usize) -> u64 {
    mix(0x5151_0000 ^ block as u64)
}

/// Order-independent hash of a row's column pattern.
pub fn support_hash(block: usize, cols: impl Iterator<Item = usize>) -> u64 {
    cols.fold(0u64, |h, c| h.wrapping_add(mix(salt(block) ^ c as u64)))
}

pub fn coefficient_hash(entries: &[(usize, f64)]) -> u64 {
    let Some(&(_, first)) = entries.first() else { return 0 };
    entries.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &(_, v)| {
        let q = ((v / first) / HASH_GRID).round() as i64;
        mix(h ^ q as u64)
    })
}

/// Exact proportionality test: same pattern and every coefficient ratio
/// normalized by the first entry agrees within `tol`. Returns `lambda` with
/// `k = lambda * l`.
pub fn proportional(l: &[(usize, f64)], k: &[(usize, f64)], tol: f64) -> Option<f64> {
    if l.len() != k.len() || l.is_empty() {
        return None;
    }
    let (l0, k0) = (l[0].1, k[0].1);
    for (&(cl, vl), &(ck, vk)) in l.iter().zip(k) {
        if cl != ck || (vl / l0 - vk / k0).abs() > tol {
            return None;
        }
    }
    Some(k0 / l0)
}

/// All parallel pairs `(i, j, lambda)` with `i < j` and `rows[j] = lambda * rows[i]`.
pub fn detect(rows: &[Vec<(usize, f64)>], tol: f64) -> Vec<(usize, usize, f64)> {
    let mut order: Vec<(u64, usize, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(i, r)| (support_hash(0, r.iter().map(|e| e.0)), r.len(), i))
        .collect();
    order.sort_unstable();
    let mut pairs = Vec::new();
    let mut s = 0;
    while s < order.len() {
        let mut e = s + 1;
        while e < order.len() && order[e].0 == order[s].0 && order[e].1 == order[s].1 {
            e += 1;
        }
        if e - s > 1 {
            let mut by_coef: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for &(_, _, i) in &order[s..e] {
                by_coef.entry(coefficient_hash(&rows[i])).or_default().push(i);
            }
            for group in by_coef.values() {
                for (x, &i) in group.iter().enumerate() {
                    for &j in &group[x + 1..] {
                        let (a, b) = if i < j { (i, j) } else { (j, i) };
                        if let Some(lambda) = proportional(&rows[a], &rows[b], tol) {
                            pairs.push((a, b, lambda));
                        }
                    }
                }
            }
        }
        s = e;
    }
    pairs.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    pairs
}

fn tol(cfg: &PresolveConfig, v: f64) -> f64 {
    cfg.feastol * v.abs().max(1.0)
}

/// Applies the reduction for `row k = lambda * row l`.
fn reduce_pair(w: &mut RankProblem, l: usize, k: usize, lambda: f64, global: bool, cfg: &PresolveConfig) {
    if !w.row_alive(l) || !w.row_alive(k) {
        return;
    }
    let (rl, rk) = (w.row(l), w.row(k));
    let (dl, fl, dk, fk) = (rl.lower, rl.upper, rk.lower, rk.upper);
    let names = format!("{} / {}", rl.name, rk.name);
    let infeasible = |w: &mut RankProblem| {
        w.fail(PresolveError::Infeasible(format!("parallel rows {names} have incompatible bounds")));
    };
    let entry = |kept, deleted, lambda: f64, dd: f64, du: f64, lf, uf| StackEntry::DeletedParallelRow {
        kept,
        deleted,
        lambda,
        deleted_lower: dd,
        deleted_upper: du,
        lower_from_deleted: lf,
        upper_from_deleted: uf,
    };
    match (rl.kind, rk.kind) {
        (RowKind::Equality, _) => {
            let v = lambda * dl;
            if v < dk - tol(cfg, dk) || v > fk + tol(cfg, fk) {
                return infeasible(w);
            }
            w.push(global, entry(l, k, lambda, dk, fk, false, false));
            w.delete_row(k);
        }
        (RowKind::Inequality, RowKind::Equality) => {
            let v = dk / lambda;
            if v < dl - tol(cfg, dl) || v > fl + tol(cfg, fl) {
                return infeasible(w);
            }
            w.push(global, entry(k, l, 1.0 / lambda, dl, fl, false, false));
            w.delete_row(l);
        }
        (RowKind::Inequality, RowKind::Inequality) => {
            let (lo, hi) = if lambda > 0.0 { (dk / lambda, fk / lambda) } else { (fk / lambda, dk / lambda) };
            let lf = lo > dl;
            let uf = hi < fl;
            let mut nd = dl.max(lo);
            let nf = fl.min(hi);
            if nd > nf {
                if nd - nf > tol(cfg, nf) {
                    return infeasible(w);
                }
                nd = nf;
            }
            w.push(global, entry(l, k, lambda, dk, fk, lf, uf));
            let row = w.row_mut(l);
            row.lower = nd;
            row.upper = nf;
            w.delete_row(k);
        }
    }
}

/// Parallel rows within each owned block and among the block-0 rows.
pub fn run_local(w: &mut RankProblem, cfg: &PresolveConfig) {
    let mut groups: Vec<(bool, Vec<usize>)> = vec![(true, Vec::new())];
    for &b in &w.own_blocks {
        groups.push((false, w.live_rows().into_iter().filter(|&r| w.row(r).scope == RowScope::Local(b)).collect()));
    }
    groups[0].1 = w.live_rows().into_iter().filter(|&r| w.row(r).scope == RowScope::Zero).collect();
    for (global, ids) in groups {
        let rows: Vec<Vec<(usize, f64)>> = ids.iter().map(|&r| w.row(r).entries.clone()).collect();
        for (i, j, lambda) in detect(&rows, cfg.parallel_tol) {
            if w.failed() {
                return;
            }
            reduce_pair(w, ids[i], ids[j], lambda, global, cfg);
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PairState {
    parallel: bool,
    min_ratio: f64,
    max_ratio: f64,
}

fn pair_op() -> ReduceOp<PairState> {
    ReduceOp::new(
        "and-min-max",
        PairState { parallel: true, min_ratio: f64::INFINITY, max_ratio: f64::NEG_INFINITY },
        true,
        |a: &PairState, b: &PairState| PairState {
            parallel: a.parallel && b.parallel,
            min_ratio: a.min_ratio.min(b.min_ratio),
            max_ratio: a.max_ratio.max(b.max_ratio),
        },
    )
}

/// Linking rows as seen by this rank: own-block entries, plus the linking
/// column part on rank 0.
fn link_slice(w: &RankProblem, r: usize) -> Vec<(usize, f64)> {
    w.row(r).entries.iter().copied().filter(|&(j, _)| w.col(j).block != 0 || w.rank == 0).collect()
}

/// Globally parallel linking row pairs `(l, k, lambda)`. Collective.
pub fn detect_linking(w: &RankProblem, cfg: &PresolveConfig, comm: &Communicator) -> Vec<(usize, usize, f64)> {
    let rows = w.alive_link_rows();
    let slices: Vec<Vec<(usize, f64)>> = rows.iter().map(|&r| link_slice(w, r)).collect();
    let partial: Vec<u64> = slices
        .iter()
        .map(|s| s.iter().fold(0u64, |h, &(j, _)| h.wrapping_add(support_hash(w.col(j).block, std::iter::once(j)))))
        .collect();
    let hashes = comm.allreduce(&partial, &ReduceOp::<u64>::wrapping_sum());
    let mut order: Vec<(u64, i64, usize)> =
        rows.iter().enumerate().filter(|(_, &r)| w.track.row_nnz[r] > 0).map(|(i, &r)| (hashes[i], w.track.row_nnz[r], i)).collect();
    order.sort_unstable();
    let mut cands: Vec<(usize, usize)> = Vec::new();
    let mut s = 0;
    while s < order.len() {
        let mut e = s + 1;
        while e < order.len() && order[e].0 == order[s].0 && order[e].1 == order[s].1 {
            e += 1;
        }
        for x in s..e {
            for y in x + 1..e {
                let (a, b) = (order[x].2.min(order[y].2), order[x].2.max(order[y].2));
                cands.push((a, b));
            }
        }
        s = e;
    }
    cands.sort_unstable();
    let states: Vec<PairState> = cands
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (&slices[a], &slices[b]);
            if sa.is_empty() && sb.is_empty() {
                return *pair_op().identity();
            }
            match proportional(sa, sb, cfg.parallel_tol) {
                Some(lambda) => PairState { parallel: true, min_ratio: lambda, max_ratio: lambda },
                None => PairState { parallel: false, min_ratio: f64::INFINITY, max_ratio: f64::NEG_INFINITY },
            }
        })
        .collect();
    let total = comm.allreduce(&states, &pair_op());
    cands
        .iter()
        .zip(total)
        .filter(|(_, st)| {
            st.parallel
                && st.min_ratio.is_finite()
                && st.max_ratio - st.min_ratio <= cfg.parallel_tol * (1.0 + st.min_ratio.abs())
        })
        .map(|(&(a, b), st)| (rows[a], rows[b], st.min_ratio))
        .collect()
}

pub fn run_linking(w: &mut RankProblem, cfg: &PresolveConfig, comm: &Communicator) {
    let pairs = detect_linking(w, cfg, comm);
    for (l, k, lambda) in pairs {
        if w.failed() {
            return;
        }
        reduce_pair(w, l, k, lambda, true, cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_scaled_inequalities_example() {
        let rows = vec![vec![(0, 2.0), (1, 4.0)], vec![(0, 1.0), (1, 2.0)]];
        assert_eq!(detect(&rows, 1e-10), vec![(0, 1, 0.5)]);
    }

    #[test]
    fn different_pattern_not_parallel() {
        let rows = vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 1.0), (2, 2.0)], vec![(0, 1.0), (1, 2.5)]];
        assert!(detect(&rows, 1e-10).is_empty());
    }
}
