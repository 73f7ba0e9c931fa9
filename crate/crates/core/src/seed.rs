//! Seed derivation.
//!
//! Every trajectory gets one master seed. Environment, policy and budget
//! randomness are drawn from separate ChaCha streams keyed by that seed, so a
//! trajectory replays identically no matter which thread evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the engine.
pub type SimRng = ChaCha8Rng;

pub const STREAM_ENV: u64 = 1;
pub const STREAM_POLICY: u64 = 2;
pub const STREAM_BUDGET: u64 = 3;
pub const STREAM_TRAIN: u64 = 4;

/// SplitMix64 finalizer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `master` and a path of indices.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// RNG for one named stream of a seed.
pub fn stream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
