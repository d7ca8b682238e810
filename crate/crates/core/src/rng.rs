//! Seed and stream derivation.
//!
//! Every sampling operation builds its own [`ChaCha8Rng`] from a `(seed, stream)` pair.
//! ChaCha is counter based, so a generator is a pure function of the key and stream
//! id and results do not depend on how work is split across threads.
//!
//! Nested work (trial `i`, coordinate `j`, ...) derives child seeds with
//! [`derive_seed`], a SplitMix64 fold over the path of indices. Stream ids used by
//! this crate are listed in [`streams`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids reserved per operation.
pub mod streams {
    pub const OBLIVIOUS: u64 = 1;
    pub const OBSERVATION: u64 = 2;
    pub const DIRECTION: u64 = 3;
    pub const WITNESS_X: u64 = 4;
    pub const WITNESS_Y: u64 = 5;
    pub const HARDNESS: u64 = 6;
    pub const PARTITION_S1: u64 = 7;
    pub const PARTITION_S2: u64 = 8;
    pub const PAIRS: u64 = 9;
    pub const SIGN_BASIS: u64 = 10;
    pub const SUBSAMPLE: u64 = 11;
    pub const REPLAY: u64 = 12;
}

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the index path `path` under `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
