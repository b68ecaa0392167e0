//! Shared fixtures for the benchmarks.

use rand::Rng;

use pivot_core::env::OBS_DIM;
use pivot_core::rng::rng_from;

/// `n` observation-shaped vectors in the ranges seen during training.
pub fn observations(n: usize, seed: u64) -> Vec<[f64; OBS_DIM]> {
    let mut rng = rng_from(seed, &[]);
    (0..n)
        .map(|_| {
            [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(0.02..0.04),
            ]
        })
        .collect()
}
