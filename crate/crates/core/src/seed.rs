//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a tuple of integers hashed
//! through splitmix64, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a list of keys into one 64-bit seed.
pub fn derive(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x4C50_4146_u64, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Encodes an angle in degrees as a seed key (bit pattern of the f64).
pub fn angle_key(theta_deg: f64) -> u64 {
    // -0.0 and 0.0 must map to the same stream
    (theta_deg + 0.0).to_bits()
}

pub fn rng(keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(keys))
}

/// Domain tags keep independent streams apart.
pub mod tag {
    pub const TRAJECTORY: u64 = 1;
    pub const HELDOUT: u64 = 2;
    pub const EPISODE: u64 = 3;
    pub const INIT_POLICY: u64 = 4;
    pub const INIT_FUSION: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const REF_PAIRS: u64 = 7;
    pub const HEATMAP: u64 = 8;
}
