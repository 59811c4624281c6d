mod common;

use proptest::prelude::*;

use arrowhead::comm::ExecMode;
use arrowhead::oracle::{brute_force_parallel_rows, dense_rank};
use arrowhead::presolve::elim::dependent_rows;
use arrowhead::presolve::parallel::detect;
use arrowhead::presolve::PresolveConfig;

/// Integer rows, the last few being integer combinations of earlier ones.
fn dependent_system() -> impl Strategy<Value = (Vec<Vec<(usize, f64)>>, usize)> {
    (2usize..8, 2usize..10, 0usize..4).prop_flat_map(|(base, ncols, extra)| {
        let row = proptest::collection::vec(-3i32..=3, ncols);
        let mix = proptest::collection::vec(-2i32..=2, base);
        (proptest::collection::vec(row, base), proptest::collection::vec(mix, extra), Just(ncols))
    })
    .prop_map(|(base, mixes, ncols)| {
        let mut dense: Vec<Vec<f64>> = base.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        for m in mixes {
            let r = (0..ncols).map(|j| m.iter().zip(&dense).map(|(&w, row)| w as f64 * row[j]).sum()).collect();
            dense.push(r);
        }
        let sparse = dense.iter().map(|r| r.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &v)| (j, v)).collect()).collect();
        (sparse, ncols)
    })
}

fn densify(rows: &[Vec<(usize, f64)>], ncols: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut d = vec![0.0; ncols];
            for &(j, v) in r {
                d[j] = v;
            }
            d
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn elimination_finds_exactly_the_rank_deficiency((rows, ncols) in dependent_system()) {
        let deps = dependent_rows(&rows, 0.01, 1e-9);
        let dense = densify(&rows, ncols);
        prop_assert_eq!(rows.len() - deps.len(), dense_rank(&dense, 1e-9));
        for d in &deps {
            prop_assert!(d.weights.iter().any(|&(q, w)| q == d.row && w == 1.0));
            for j in 0..ncols {
                let s: f64 = d.weights.iter().map(|&(q, w)| w * dense[q][j]).sum();
                prop_assert!(s.abs() <= 1e-8, "row {} column {j}: {s}", d.row);
            }
        }
    }

    #[test]
    fn hashed_detection_matches_brute_force(seed in any::<u64>()) {
        let tol = 1e-10;
        let (rows, ncols) = common::detection_matrix(seed, tol);
        let fast: Vec<(usize, usize)> = detect(&rows, tol).iter().map(|e| (e.0, e.1)).collect();
        let slow: Vec<(usize, usize)> = brute_force_parallel_rows(&rows, ncols, tol).iter().map(|e| (e.0, e.1)).collect();
        prop_assert_eq!(fast, slow);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn presolve_round_trips_and_keeps_shape(seed in 0u64..10_000, nb_pick in 0usize..3, threaded in any::<bool>()) {
        let nb = [2, 4, 8][nb_pick];
        let g = common::instance(seed, nb, 6);
        let cfg = PresolveConfig { check_structure: true, ..Default::default() };
        let mode = if threaded { ExecMode::Threaded } else { ExecMode::Lockstep };
        let rt = common::round_trip(&g, nb.min(4), mode, &cfg);
        prop_assert!(rt.kkt.within(1e-6), "{:?}", rt.kkt);
        for c in &rt.result.checks {
            prop_assert!(c.violations.is_empty() && !c.grew, "{:?}", c);
        }
        prop_assert!((rt.original_objective - rt.reduced_objective).abs() <= 1e-6 * (1.0 + rt.original_objective.abs()));
    }

    #[test]
    fn tracking_survives_random_events(seed in 0u64..10_000, nranks in 1usize..=4) {
        let g = common::instance(seed, 4, 6);
        for (bad, _) in common::tracking_stress(&g, nranks, ExecMode::Lockstep, seed, 400) {
            prop_assert!(bad.is_empty(), "{:?}", bad);
        }
    }
}
