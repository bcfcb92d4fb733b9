//! Counter-based seed splitting.
//!
//! Every random draw in a run comes from a `ChaCha8Rng` seeded by
//! [`mix`] over a fixed tuple of counters, so results never depend on
//! scheduling order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Parent identifier used for draws that have no parent candidate.
pub const ROOT: u64 = u64::MAX;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(run_seed, step, parent, child)`.
pub fn mix(run_seed: u64, step: u64, parent: u64, child: u64) -> u64 {
    [step, parent, child]
        .iter()
        .fold(splitmix64(run_seed), |h, &w| splitmix64(h ^ splitmix64(w)))
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `dim` independent standard normals drawn from `seed`.
pub fn standard_normal(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = rng_for(seed);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}
