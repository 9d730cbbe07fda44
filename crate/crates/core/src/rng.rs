//! Seeded random streams.
//!
//! Every random quantity in the crate comes from [`ChaCha8Rng`] seeded with a
//! 64-bit value, which makes instances and runs bit-reproducible on every
//! platform. Independent streams are keyed with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one run of one solver on one instance.
///
/// The key is folded left to right through SplitMix64:
/// `h = mix(mix(mix(mix(base) ^ instance) ^ solver) ^ run)`. The result only
/// depends on the key, never on scheduling, so parallel sweeps stay
/// reproducible.
pub fn derive_seed(base_seed: u64, instance: u64, solver: u64, run: u64) -> u64 {
    let mut h = splitmix64(base_seed);
    for part in [instance, solver, run] {
        h = splitmix64(h ^ part);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn derived_seeds_are_distinct_over_a_grid() {
        let mut seen = HashSet::new();
        for inst in 0..10 {
            for solver in 0..6 {
                for run in 0..100 {
                    assert!(seen.insert(derive_seed(42, inst, solver, run)));
                }
            }
        }
    }

    #[test]
    fn derived_seed_is_stable() {
        assert_eq!(derive_seed(7, 1, 2, 3), derive_seed(7, 1, 2, 3));
        assert_ne!(derive_seed(7, 1, 2, 3), derive_seed(7, 1, 3, 2));
    }
}
