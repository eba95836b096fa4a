//! Criterion benchmarks for the simulator, the master-equation solver and
//! the equilibrium finder. Run with `cargo bench -p bicw-bench`.
