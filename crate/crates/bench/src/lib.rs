//! Benchmark-only crate; see `benches/grover.rs`.
