//! Seed derivation and random stream layout.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream keyed by a
//! 64-bit seed. Common randomness for slot `i` lives on stream number `i` of
//! the generator keyed by the master seed, so the chosen set of a slot does
//! not depend on how many draws earlier slots consumed. Channel noise uses a
//! separate key derived from the master seed with [`NOISE_DOMAIN`], so nodes
//! and receiver cannot predict it from the common stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tag mixed into the master seed to key the noise generator.
pub const NOISE_DOMAIN: u64 = 0x6e6f_6973_655f_7374;

/// SplitMix64 finalizer. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` in a batch keyed by `seed_base`:
/// `mix64(seed_base + index)` with wrapping addition.
pub fn trial_seed(seed_base: u64, index: u64) -> u64 {
    mix64(seed_base.wrapping_add(index))
}

/// Common-randomness stream for slot `slot` (1-based) under `master_seed`.
pub fn slot_stream(master_seed: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(slot);
    rng
}

/// Noise generator paired with `master_seed`.
pub fn noise_stream(master_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(master_seed ^ NOISE_DOMAIN))
}
