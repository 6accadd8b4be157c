//! Criterion benchmarks for the stochopt solvers live in `benches/solvers.rs`.
