//! Criterion benchmarks of the laboratory's hot kernels live in `benches/`;
//! run them with `cargo bench -p paracz-bench`.
