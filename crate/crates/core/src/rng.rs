//! Seed derivation: every random stream is a pure function of a master seed
//! and a tag path, so work can be split across threads in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Tag for data generation streams.
pub const TAG_DATA: u64 = 0x6461_7461;
/// Tag for permutation streams.
pub const TAG_PERMUTATION: u64 = 0x7065_726d;
/// Tag for the ASCLT diagnostic's normal draws.
pub const TAG_DIAGNOSTIC: u64 = 0x6469_6167;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc.rotate_left(23) ^ splitmix64(t))
    })
}

pub fn stream(master: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, tags))
}
