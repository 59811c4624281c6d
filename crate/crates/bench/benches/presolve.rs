use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use arrowhead::comm::ExecMode;
use arrowhead::generator::{generate, GenSpec};
use arrowhead::oracle::solve_block_problem;
use arrowhead::postsolve::postsolve;
use arrowhead::presolve::{presolve, PresolveConfig};

fn instance() -> GenSpec {
    GenSpec { rows_per_block: 200, cols_per_block: 240, density: 0.03, linking_rows: 8, linking_cols: 10, ..GenSpec::planted(1, 8) }
}

fn bench_presolve(c: &mut Criterion) {
    let g = generate(&instance()).unwrap();
    let p = g.block_problem();
    let cfg = PresolveConfig::default();
    let mut group = c.benchmark_group("presolve");
    group.sample_size(10);
    for ranks in [1, 2, 4, 8] {
        group.bench_with_input(BenchmarkId::new("threaded", ranks), &ranks, |b, &n| {
            b.iter(|| presolve(&p, n, ExecMode::Threaded, &cfg).unwrap())
        });
    }
    group.bench_function("lockstep/8", |b| b.iter(|| presolve(&p, 8, ExecMode::Lockstep, &cfg).unwrap()));
    group.finish();
}

fn bench_postsolve(c: &mut Criterion) {
    let g = generate(&GenSpec { rows_per_block: 40, cols_per_block: 48, density: 0.1, ..GenSpec::planted(2, 4) }).unwrap();
    let p = g.block_problem();
    let res = presolve(&p, 4, ExecMode::Lockstep, &PresolveConfig::default()).unwrap();
    let (_, reduced) = solve_block_problem(&res.reduced).unwrap();
    c.bench_function("postsolve/4", |b| b.iter(|| postsolve(&g.lp, &res.stacks, &reduced, ExecMode::Lockstep).unwrap()));
}

criterion_group!(benches, bench_presolve, bench_postsolve);
criterion_main!(benches);
