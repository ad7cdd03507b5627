//! Shared fixtures for the benchmarks.

use stochbvp_core::{sample_wiener, Grid, RngSpec, SamplePath};

pub const SIZES: [usize; 3] = [128, 512, 2048];

/// A fixed Wiener path on `n` subintervals.
pub fn fixed_path(n: usize) -> SamplePath {
    sample_wiener(Grid::new(n).expect("n >= 2"), RngSpec::new(17, 0))
}
