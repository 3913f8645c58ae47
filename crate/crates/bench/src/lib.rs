//! Criterion benchmarks for the Lyapunov solver, balancing and Monte Carlo stepping;
//! run with `cargo bench -p levymor-bench`.
