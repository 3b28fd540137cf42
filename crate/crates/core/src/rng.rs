//! Seed derivation.
//!
//! Every randomized stage draws from its own ChaCha stream keyed by
//! `(seed, stage)`, so adding draws to one stage never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies an independent random stream inside one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Placement = 1,
    Hiding = 2,
    LineWidths = 3,
    Stylize = 4,
    Relief = 5,
    Annotate = 6,
    Degrade = 7,
    Colors = 8,
    Noise = 9,
    Fixture = 10,
}

pub type StageRng = ChaCha8Rng;

pub fn stream(seed: u64, stage: Stage) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

/// SplitMix64 finalizer; used to derive per-sample seeds from a base seed.
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
