//! Seed derivation. Every random draw in a run comes from a ChaCha8 stream
//! seeded by mixing the run seed with the coordinates of the draw, so results
//! do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold `parts` into `seed`.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_coordinates_give_distinct_seeds() {
        let mut seen = std::collections::HashSet::new();
        for t in 0..50u64 {
            for phase in 0..2u64 {
                assert!(seen.insert(mix(1, &[t, phase])));
            }
        }
        assert_eq!(mix(9, &[1, 2]), mix(9, &[1, 2]));
        assert_ne!(mix(9, &[1, 2]), mix(9, &[2, 1]));
    }
}
