//! Small deterministic helpers shared across the crate.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::hashing::fnv1a64;

/// Derives a per-stage seed from the run seed so that independent stages
/// draw from independent streams.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    fnv1a64(master, stage.as_bytes())
}

/// Deterministic RNG for one pipeline stage.
pub fn stage_rng(master: u64, stage: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(stage_seed(master, stage))
}
