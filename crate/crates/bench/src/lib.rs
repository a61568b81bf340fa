//! Benchmarks for the porocrack solver; see `benches/`.
