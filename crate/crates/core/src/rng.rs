//! Seed derivation for reproducible runs.
//!
//! Every random decision draws from a generator derived from the run seed,
//! a stream tag, and an index. Separate streams keep unrelated consumers
//! (latent noise, token sampling, dropout, shuffling) from perturbing each
//! other's draws, so adding one consumer never shifts the rest of the run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    LatentNoise,
    TokenSampling,
    Dropout,
    Split,
    Eval,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::LatentNoise => 3,
            Stream::TokenSampling => 4,
            Stream::Dropout => 5,
            Stream::Split => 6,
            Stream::Eval => 7,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for (`seed`, `stream`, `index`).
pub fn derive(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ stream.tag().rotate_left(17)) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}
