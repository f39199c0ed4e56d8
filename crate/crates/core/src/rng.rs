//! Seed derivation for independent per-item random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type SynthRng = ChaCha8Rng;

/// SplitMix64 finalizer. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of a run seeded with `seed`: `mix64(seed ^ index)`.
///
/// Depends only on `(seed, index)`, so parallel generation reproduces the
/// serial output.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ index)
}

/// Independent sub-stream `stream` of item `index`.
pub fn item_rng(seed: u64, index: u64, stream: u64) -> SynthRng {
    let mut rng = SynthRng::seed_from_u64(derive_seed(seed, index));
    rng.set_stream(stream);
    rng
}

pub fn seeded(seed: u64) -> SynthRng {
    SynthRng::seed_from_u64(seed)
}
