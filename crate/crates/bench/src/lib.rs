//! Criterion benchmarks for capeval; see `benches/`.
