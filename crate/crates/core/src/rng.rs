//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator seeded from
//! `derive_seed(root, label)`: the label is hashed with 64-bit FNV-1a,
//! xor-ed into the root seed and passed through the SplitMix64 finalizer.
//! Indexed streams (trial `i` of an experiment) fold the index in with a
//! second SplitMix64 round. A stream can therefore be reproduced from the
//! root seed and its label alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a(label))
}

pub fn derive_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(root, label) ^ splitmix64(index))
}

pub fn stream(root: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

pub fn indexed_stream(root: u64, label: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_indexed(root, label, index))
}
