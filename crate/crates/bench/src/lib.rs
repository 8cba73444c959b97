//! Criterion benchmarks of the simulator kernels live in `benches/`.
