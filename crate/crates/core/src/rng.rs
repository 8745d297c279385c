//! Keyed random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose key
//! is expanded from the user seed and whose 64-bit stream id is derived from a
//! path of integers (a domain tag followed by loop indices). Two loops that
//! address the same path always see the same numbers, regardless of how work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams of different purposes disjoint.
pub mod tag {
    pub const COHORT: u64 = 0x636f_686f_7274;
    pub const SUBJECT: u64 = 0x7375_626a;
    pub const PERMUTATION: u64 = 0x7065_726d;
    pub const RHO: u64 = 0x0072_686f;
    pub const TEST_SEED: u64 = 0x7465_7374;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a path of integers into a 64-bit value.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    for (depth, &word) in path.iter().enumerate() {
        h = splitmix(h ^ splitmix(word ^ (depth as u64).wrapping_mul(0xd1b5_4a32_d192_ed03)));
    }
    h
}

/// Independent stream for `(seed, path)`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(
            &splitmix(seed ^ (i as u64).wrapping_mul(0xa076_1d64_78bd_642f)).to_le_bytes(),
        );
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(derive(seed, path));
    rng
}
