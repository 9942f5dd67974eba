//! Seeded random streams.
//!
//! Every random component draws from a ChaCha8 generator keyed by the user
//! seed and a stream id. Named streams (`"walks"`, `"splits"`, ...) hash their
//! label into the id so independent components never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, stable across platforms and compiler versions.
pub fn label_id(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator for the named component `label` under `seed`.
pub fn named_stream(seed: u64, label: &str) -> ChaCha8Rng {
    indexed_stream(seed, label_id(label))
}

/// Generator for stream `index` under `seed`.
pub fn indexed_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, e.g. for the i-th replicate of a sweep.
pub fn child_seed(seed: u64, label: &str, index: u64) -> u64 {
    use rand::RngCore;
    let mut rng = named_stream(seed, label);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}
