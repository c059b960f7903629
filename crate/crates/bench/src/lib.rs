//! Criterion benchmarks for graph construction, spectral grouping, k-means
//! and the weak-annotation pipeline. Run with `cargo bench -p specweak-bench`.
