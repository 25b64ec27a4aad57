//! Criterion benchmarks for the privsched kernels live in `benches/`.
