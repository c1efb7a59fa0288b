//! Criterion benchmarks for the arnold-core kernels live in `benches/`.
