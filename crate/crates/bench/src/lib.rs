//! Fixtures shared by the benchmarks.

use ndarray::{Array1, Array2};
use otsense::CostMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random `n x m` cost matrix with entries in `[0, 1)`.
pub fn random_cost(n: usize, m: usize, seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..1.0))).expect("finite costs")
}

pub fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}
