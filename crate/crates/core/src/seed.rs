//! Deterministic sub-seed derivation.
//!
//! Every random stream in a run is keyed by the master seed plus a textual
//! tag (`"g_prime"`, `"sample/alarm_query"`, ...), so adding a stream never
//! perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hash::Hasher;

/// Derives a sub-seed from `master` and a tag.
pub fn derive(master: u64, tag: &str) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write_u64(master);
    h.write(tag.as_bytes());
    splitmix64(h.finish())
}

/// Seeded RNG for the stream named by `tag`.
pub fn rng(master: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tag))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
