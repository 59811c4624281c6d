//! Criterion benchmarks for presolve and postsolve; see `benches/`.
