//! Seed derivation for independent per-stage random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser; decorrelates nearby integer seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stage `stage` of a run seeded with `master`.
pub fn child_seed(master: u64, stage: u64) -> u64 {
    mix(mix(master) ^ stage.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stage_rng(master: u64, stage: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, stage))
}
