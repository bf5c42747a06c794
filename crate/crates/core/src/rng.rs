//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by a master
//! seed, a named purpose and an index. Replicate `i` of a bootstrap always sees
//! the same stream no matter how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named substream purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Simulation,
    Weights,
    BlockStarts,
    Resample,
    Selection,
    ClusterInit,
    Cell,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Simulation => 0x5349_4d55,
            Stream::Weights => 0x5745_4947,
            Stream::BlockStarts => 0x424c_4f43,
            Stream::Resample => 0x5245_5341,
            Stream::Selection => 0x5345_4c45,
            Stream::ClusterInit => 0x434c_5553,
            Stream::Cell => 0x4345_4c4c,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed, a purpose and an index.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(seed ^ stream.tag().rotate_left(32)) ^ mix64(index))
}

/// Seed for a string key, stable across platforms and compiler versions (FNV-1a).
pub fn seed_for_key(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive_seed(seed, Stream::Cell, h)
}

pub fn stream(seed: u64, stream: Stream, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}
