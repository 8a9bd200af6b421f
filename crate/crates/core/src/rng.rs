//! Deterministic random streams.
//!
//! Every stochastic operation derives an independent ChaCha stream from the
//! user seed plus a tuple of indices (sweep point, shot, resample, ...), so
//! results do not depend on scheduling order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for the stream addressed by `indices` under `seed`.
pub fn stream(seed: u64, indices: &[u64]) -> ChaCha8Rng {
    let mut key = splitmix64(indices.len() as u64);
    for &i in indices {
        key = splitmix64(key ^ splitmix64(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}
