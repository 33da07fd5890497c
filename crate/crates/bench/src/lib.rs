//! Benchmarks of the hot kernels; see `benches/kernels.rs`.
