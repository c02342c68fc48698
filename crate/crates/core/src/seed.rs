//! Deterministic seed derivation.
//!
//! Every randomized routine in the crate takes an explicit `u64` seed and
//! uses a counter-based generator, so results never depend on scheduling or
//! on how many random values an unrelated task consumed. Subordinate seeds
//! are derived from a root seed plus stable stream/index labels; fanning
//! tasks out to threads cannot change any output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 step; the standard finalizer with good avalanche behavior.
fn splitmix(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a subordinate seed from a root seed, a stream label, and an index.
///
/// Distinct (stream, index) pairs give statistically independent seeds, and
/// the derivation is pure, so parallel schedules reproduce serial results.
pub fn derive(root: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(root) ^ stream) ^ index)
}

/// Counter-based RNG for a given seed; identical on every platform.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
