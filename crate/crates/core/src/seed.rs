//! Deterministic seed derivation.
//!
//! Every random component (data split, weight initialization, GP restarts,
//! CV fold assignment) draws from its own stream derived from one root seed
//! and a stable label, so adding a component never perturbs another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a root seed with a component label into an independent 64-bit seed.
pub fn derive(root: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer over (root ^ hash).
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

/// Same as [`derive`] with an additional integer index (fold number, restart, ...).
pub fn derive_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(root, label) ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
