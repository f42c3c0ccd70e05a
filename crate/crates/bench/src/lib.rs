//! Criterion benchmarks for the pnqkd core; see `benches/`.
