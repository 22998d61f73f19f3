//! Benchmarks only; run with `cargo bench -p coapsim-bench`.
