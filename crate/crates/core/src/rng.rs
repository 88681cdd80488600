//! Seeded random streams.
//!
//! All randomness comes from ChaCha8, a counter-based generator. A stream is
//! addressed by `(seed, domain, index)`, so independent consumers (one per
//! trajectory, one per epoch shuffle, ...) draw from disjoint streams and the
//! results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream domains. Keep these stable: changing one changes every dataset.
pub mod domain {
    pub const MODEL_INIT: u32 = 1;
    pub const SHUFFLE: u32 = 2;
    pub const VDP_TRAIN: u32 = 10;
    pub const VDP_VALIDATION: u32 = 11;
    pub const VDP_TEST: u32 = 12;
    pub const NOISE: u32 = 20;
    pub const DUFFING: u32 = 30;
}

/// Generator seeded from `seed` and positioned on the stream `(domain, index)`.
pub fn stream(seed: u64, domain: u32, index: u32) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 32) | index as u64);
    rng
}
