mod common;

use arrowhead::comm::ExecMode;
use arrowhead::presolve::PresolveConfig;

#[test]
fn single_rank_small_instances() {
    let cfg = PresolveConfig { check_structure: true, ..Default::default() };
    for seed in 0..20 {
        let g = common::instance(seed, 1 + (seed as usize % 4), 6);
        let rt = common::round_trip(&g, 1, ExecMode::Lockstep, &cfg);
        assert!(rt.kkt.within(1e-6), "seed {seed}: {:?}", rt.kkt);
        let diff = (rt.original_objective - rt.reduced_objective).abs();
        assert!(diff <= 1e-6 * (1.0 + rt.original_objective.abs()), "seed {seed}: {} vs {}", rt.original_objective, rt.reduced_objective);
    }
}

#[test]
fn multi_rank_instances() {
    let cfg = PresolveConfig { check_structure: true, ..Default::default() };
    for seed in 0..40 {
        let nb = [2, 4, 8][seed as usize % 3];
        let g = common::instance(100 + seed, nb, 6);
        for nranks in [1, 2, nb] {
            let rt = common::round_trip(&g, nranks, ExecMode::Lockstep, &cfg);
            assert!(rt.kkt.within(1e-6), "seed {seed} ranks {nranks}: {:?}", rt.kkt);
            for c in &rt.result.checks {
                assert!(c.violations.is_empty() && !c.grew, "seed {seed} ranks {nranks}: {c:?}");
            }
            let diff = (rt.original_objective - rt.reduced_objective).abs();
            assert!(diff <= 1e-6 * (1.0 + rt.original_objective.abs()), "seed {seed} ranks {nranks}: {} vs {}", rt.original_objective, rt.reduced_objective);
        }
    }
}

#[test]
fn planted_reductions_found() {
    let cfg = PresolveConfig::default();
    for seed in 0..40 {
        let nb = [1, 2, 4, 8][seed as usize % 4];
        let g = common::instance(500 + seed, nb, 8);
        let r = arrowhead::presolve::presolve(&g.block_problem(), nb.min(2), ExecMode::Lockstep, &cfg).unwrap();
        let missed = common::missed_plants(&g.manifest, &r.reduced);
        assert!(missed.is_empty(), "seed {seed}: {missed:?}");
    }
}
