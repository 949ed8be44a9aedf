//! Seeded random streams.
//!
//! Every generator is a ChaCha8 instance keyed by a 64-bit seed and a stream
//! id. Streams with the same seed are independent, so parallel chains use one
//! seed and distinct stream ids. Higher-level seeds (per subcommand, per
//! repeat) are derived with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids reserved for the library's own consumers.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const DATAGEN: u64 = 2;
    pub const MAXLIK: u64 = 3;
    pub const HOLDOUT: u64 = 4;
    /// Chains get `CHAIN_BASE + chain index`.
    pub const CHAIN_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `seed` and a tag such as `"gen"` or `"train"`:
/// `splitmix64(seed ^ fnv1a(tag))`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(seed ^ h)
}
