//! Criterion benchmarks for the decoders, AMP and the bound live in
//! `benches/`; run them with `cargo bench -p sparc-bench`.
