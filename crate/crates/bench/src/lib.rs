//! Criterion benchmarks for latgraph live under `benches/`.
