//! Criterion benchmarks for the checkers live under `benches/`.
