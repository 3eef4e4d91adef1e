//! Random sources.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`] seeded with
//! `seed_from_u64`. Replication seeds are derived from a master seed with
//! [`child_seed`], a SplitMix64 finalizer over `(master, index)`, so a run is
//! reproducible from one integer on any platform.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Identifier written to output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/seed_from_u64; child seeds splitmix64(master ^ golden*(index+1))";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `index` under `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ GOLDEN.wrapping_mul(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse-CDF draw from unnormalized-free probability weights.
///
/// Falls back to the last index with positive weight when rounding leaves
/// the uniform draw above the accumulated total.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    sample_index_with(u, weights)
}

/// Inverse-CDF lookup for a given uniform `u ∈ [0, 1)`.
pub fn sample_index_with(u: f64, weights: &[f64]) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Uniform index in `0..n`.
pub fn uniform_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.random_range(0..n)
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    let u: f64 = rng.random();
    u < p
}
