mod common;

use arrowhead::comm::ExecMode;
use arrowhead::oracle::brute_force_parallel_rows;
use arrowhead::presolve::parallel::detect;

#[test]
fn incremental_tracking_matches_recomputation() {
    for (seed, nb, nranks, mode) in [(1, 2, 1, ExecMode::Lockstep), (2, 4, 2, ExecMode::Lockstep), (3, 4, 4, ExecMode::Threaded)] {
        let g = common::instance(seed, nb, 8);
        for (rank, (bad, executed)) in common::tracking_stress(&g, nranks, mode, seed, 2000).into_iter().enumerate() {
            assert!(bad.is_empty(), "seed {seed} rank {rank}: {bad:?}");
            assert!(executed > 100, "seed {seed} rank {rank}: only {executed} events applied");
        }
    }
}

#[test]
fn hashed_detection_equals_brute_force() {
    let tol = 1e-10;
    for seed in 0..100 {
        let (rows, ncols) = common::detection_matrix(seed, tol);
        let fast = detect(&rows, tol);
        let slow = brute_force_parallel_rows(&rows, ncols, tol);
        let key = |v: &[(usize, usize, f64)]| v.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>();
        assert_eq!(key(&fast), key(&slow), "seed {seed}");
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a.2 - b.2).abs() <= 1e-12 * b.2.abs(), "seed {seed}: lambda {} vs {}", a.2, b.2);
        }
    }
}
