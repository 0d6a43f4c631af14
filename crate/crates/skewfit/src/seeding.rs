//! Deterministic seed derivation.
//!
//! Every randomized routine in the crate seeds a `ChaCha8Rng` from a single
//! `u64`. Sub-streams (per trial, per outer iteration) are derived with
//! SplitMix64 so that independent work items never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for sub-stream `stream` of `master`.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(1)))
}

/// Seeded portable generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_deterministic_and_stream_separated() {
        assert_eq!(derive(42, 0), derive(42, 0));
        assert_ne!(derive(42, 0), derive(42, 1));
        assert_ne!(derive(42, 0), derive(43, 0));
    }
}
