//! Seed derivation for reproducible, parallel-safe random streams.
//!
//! Every randomized routine takes a root seed and derives one generator per
//! logical unit of work (replicate, simulation run, method) from the root
//! and a tag path.  Results then never depend on thread count or execution
//! order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 output function; advances the state by the golden-ratio
/// increment and returns a scrambled word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a tag path into a new 64-bit seed.
///
/// Tags are absorbed one at a time with a full scramble in between, so
/// distinct paths (including prefixes of each other) give unrelated seeds.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut state = root;
    let mut out = splitmix64(&mut state);
    for &tag in tags {
        state ^= tag;
        out = splitmix64(&mut state);
    }
    out
}

/// Deterministic generator for the given root seed and tag path.
pub fn stream(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tags))
}
