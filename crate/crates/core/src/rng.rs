//! Seeded, portable randomness. ChaCha8 is fully specified, so a seed gives the
//! same stream on every platform.

use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Uniform index in `0..n`. Goes through `u64` so 32- and 64-bit targets agree.
pub fn index(rng: &mut Rng, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}

/// Uniform in `[0, 1)`.
pub fn unit(rng: &mut Rng) -> f64 {
    rng.gen::<f64>()
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Fisher–Yates shuffle.
pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}
