#![allow(dead_code)]

use arrowhead::comm::ExecMode;
use arrowhead::generator::{generate, GenSpec, Generated};
use arrowhead::oracle::{kkt_check_lp, solve, solve_block_problem, LpStatus};
use arrowhead::postsolve::{kkt_residuals, postsolve, KktReport};
use arrowhead::presolve::{presolve, PresolveConfig, PresolveResult};

pub fn instance(seed: u64, n_blocks: usize, per_block: usize) -> Generated {
    let spec = GenSpec {
        rows_per_block: per_block,
        cols_per_block: per_block + 2,
        dependent_fraction: 0.03,
        misplaced_fraction: 0.03,
        ..GenSpec::planted(seed, n_blocks)
    };
    generate(&spec).expect("valid spec")
}

pub struct RoundTrip {
    pub result: PresolveResult,
    pub original_objective: f64,
    pub reduced_objective: f64,
    pub kkt: KktReport,
}

/// Presolve on `nranks` ranks, solve the reduced problem, postsolve, and
/// measure KKT residuals on the original problem.
pub fn round_trip(g: &Generated, nranks: usize, mode: ExecMode, cfg: &PresolveConfig) -> RoundTrip {
    let p = g.block_problem();
    let lp = p.to_lp_by_id().expect("complete problem");
    let original = solve(&lp).expect("oracle");
    assert_eq!(original.status, LpStatus::Optimal, "generated instance must be solvable");
    assert!(kkt_check_lp(&lp, &original).within(1e-8));
    let result = presolve(&p, nranks, mode, cfg).expect("presolve");
    let (sol, by_id) = solve_block_problem(&result.reduced).expect("oracle on reduced");
    assert_eq!(sol.status, LpStatus::Optimal, "reduced problem must stay solvable");
    let full = postsolve(&lp, &result.stacks, &by_id, mode).expect("postsolve");
    let kkt = kkt_residuals(&lp, &full);
    RoundTrip { original_objective: original.objective, reduced_objective: sol.objective, result, kkt }
}

use std::collections::BTreeSet;

use arrowhead::generator::Manifest;
use arrowhead::model::BlockProblem;

pub struct Names {
    pub rows: BTreeSet<String>,
    pub cols: BTreeSet<String>,
    pub link_rows: BTreeSet<String>,
    pub linking_cols: BTreeSet<String>,
}

pub fn names(p: &BlockProblem) -> Names {
    let b0 = &p.block0;
    let mut rows: BTreeSet<String> = BTreeSet::new();
    for g in [&b0.eq, &b0.ineq, &b0.link_eq, &b0.link_ineq] {
        rows.extend(g.names.iter().cloned());
    }
    let mut cols: BTreeSet<String> = b0.cols.vars.iter().map(|v| v.name.clone()).collect();
    for blk in &p.blocks {
        rows.extend(blk.eq.names.iter().chain(&blk.ineq.names).cloned());
        cols.extend(blk.cols.vars.iter().map(|v| v.name.clone()));
    }
    Names {
        rows,
        cols,
        link_rows: b0.link_eq.names.iter().chain(&b0.link_ineq.names).cloned().collect(),
        linking_cols: b0.cols.vars.iter().map(|v| v.name.clone()).collect(),
    }
}

/// Planted reductions not found in `reduced`; empty when all were applied.
pub fn missed_plants(m: &Manifest, reduced: &BlockProblem) -> Vec<String> {
    let n = names(reduced);
    let mut out = Vec::new();
    for (a, b) in &m.duplicates {
        if n.rows.contains(a) && n.rows.contains(b) {
            out.push(format!("duplicate pair {a}/{b}"));
        }
    }
    for r in &m.singleton_rows {
        if n.rows.contains(r) {
            out.push(format!("singleton row {r}"));
        }
    }
    for (r, src) in &m.dependent_rows {
        if n.rows.contains(r) && src.iter().all(|s| n.rows.contains(s)) {
            out.push(format!("dependent row {r}"));
        }
    }
    for c in m.fixed_cols.iter().chain(&m.empty_cols) {
        if n.cols.contains(c) {
            out.push(format!("column {c}"));
        }
    }
    for r in &m.misplaced_rows {
        if n.link_rows.contains(r) {
            out.push(format!("misplaced row {r}"));
        }
    }
    for c in &m.misplaced_cols {
        if n.linking_cols.contains(c) {
            out.push(format!("misplaced column {c}"));
        }
    }
    out
}

use arrowhead::comm::World;
use arrowhead::work::{RankProblem, RowScope};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random rows over `ncols` columns with planted exact multiples, rows that
/// share a support but not a direction, and near misses just above `tol`.
pub fn detection_matrix(seed: u64, tol: f64) -> (Vec<Vec<(usize, f64)>>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ncols = rng.gen_range(3..16);
    let m = rng.gen_range(2..30);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let quarter = |rng: &mut ChaCha8Rng| {
        let v = rng.gen_range(1..=20) as f64 / 4.0;
        if rng.gen_bool(0.5) { v } else { -v }
    };
    while rows.len() < m {
        match rng.gen_range(0..4) {
            0 | 1 if !rows.is_empty() => {
                let base = rows[rng.gen_range(0..rows.len())].clone();
                let kind = rng.gen_range(0..3);
                let lambda = [0.5, -2.0, 3.0, -0.25, 1.0][rng.gen_range(0..5)];
                let mut r: Vec<(usize, f64)> = base.iter().map(|&(c, v)| (c, v * lambda)).collect();
                if kind == 1 && !r.is_empty() {
                    let k = rng.gen_range(0..r.len());
                    r[k].1 += 0.25;
                    if r[k].1 == 0.0 {
                        r[k].1 = 0.5;
                    }
                } else if kind == 2 && !r.is_empty() {
                    let k = rng.gen_range(0..r.len());
                    r[k].1 *= 1.0 + 100.0 * tol;
                }
                rows.push(r);
            }
            _ => {
                let mut r: Vec<(usize, f64)> = Vec::new();
                for c in 0..ncols {
                    if rng.gen_bool(0.35) {
                        r.push((c, quarter(&mut rng)));
                    }
                }
                rows.push(r);
            }
        }
    }
    (rows, ncols)
}

/// Applies `events` random tracking updates on every rank of a world, syncing
/// at random points, and returns the mismatches against recomputation seen by
/// each rank plus the number of events each rank executed.
pub fn tracking_stress(g: &Generated, nranks: usize, mode: ExecMode, seed: u64, events: usize) -> Vec<(Vec<String>, usize)> {
    let p = g.block_problem();
    let slices = p.split_for_ranks(nranks);
    let n_cols = p.ids.n_cols;
    let n_rows = p.ids.n_rows();
    World::new(nranks, mode)
        .run(|comm| {
            let mut w = RankProblem::from_slice(&slices[comm.rank()], comm);
            // Identical stream on all ranks; local state only decides who acts.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut executed = 0;
            for _ in 0..events {
                let kind = rng.gen_range(0..100);
                let j = rng.gen_range(0..n_cols);
                let r = rng.gen_range(0..n_rows);
                let pick: u64 = rng.gen();
                let (a, b) = (rng.gen_range(-40..=40) as f64 / 4.0, rng.gen_range(0..=40) as f64 / 4.0);
                let inf_lo = rng.gen_bool(0.1);
                let inf_hi = rng.gen_bool(0.1);
                if kind < 3 {
                    w.sync_linking(comm);
                    continue;
                }
                let has_col = w.cols[j].as_ref().is_some_and(|c| c.alive);
                let has_row = w.rows[r].as_ref().is_some_and(|x| x.alive);
                match kind {
                    3..=59 if has_col => {
                        let lo = if inf_lo { f64::NEG_INFINITY } else { a };
                        let up = if inf_hi { f64::INFINITY } else { a + b };
                        w.set_bounds(j, lo, up);
                        executed += 1;
                    }
                    60..=84 if has_col => {
                        let col = w.col(j);
                        // A linking column only drops entries every rank holds.
                        let cands: Vec<usize> = col
                            .entries
                            .iter()
                            .map(|e| e.0)
                            .filter(|&row| col.block != 0 || !matches!(w.row(row).scope, RowScope::Local(_)))
                            .collect();
                        if !cands.is_empty() {
                            let row = cands[(pick % cands.len() as u64) as usize];
                            w.remove_entry(row, j);
                            executed += 1;
                        }
                    }
                    85..=92 if has_col && !inf_lo => {
                        w.fix_col(j, a);
                        executed += 1;
                    }
                    93..=99 if has_row => {
                        w.delete_row(r);
                        executed += 1;
                    }
                    _ => {}
                }
            }
            w.sync_linking(comm);
            (w.tracking_mismatches(comm), executed)
        })
        .expect("world runs")
}
