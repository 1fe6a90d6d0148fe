//! Seed plumbing.
//!
//! Every random operation takes a [`SeededRng`], a 64-bit seed that can be split
//! into child seeds by tag (node index, round index, trial index). A seed is
//! turned into a ChaCha8 stream by expanding it to a 256-bit key with SplitMix64,
//! so streams depend only on the seed and are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable consulted by the CLI when `--seed` is absent.
pub const SEED_ENV_VAR: &str = "HYDROSKETCH_SEED";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A splittable seed. Cheap to copy; streams are created on demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child seed keyed by `tag`.
    pub fn child(&self, tag: u64) -> SeededRng {
        let mut state = self.seed ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let a = splitmix64(&mut state);
        let mut mixed = a ^ tag.rotate_left(32);
        SeededRng {
            seed: splitmix64(&mut mixed),
        }
    }

    /// Child seed keyed by a path of tags, e.g. `[node, round]`.
    pub fn descend(&self, path: &[u64]) -> SeededRng {
        path.iter().fold(*self, |rng, &tag| rng.child(tag))
    }

    /// A fresh ChaCha8 stream for this seed.
    pub fn stream(&self) -> ChaCha8Rng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_seeds_give_identical_streams() {
        let draw = |seed| {
            let mut r = SeededRng::new(seed).stream();
            (0..8).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn children_differ_from_each_other_and_parent() {
        let root = SeededRng::new(42);
        let seeds: Vec<u64> = (0..64).map(|i| root.child(i).seed()).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert!(!seeds.contains(&root.seed()));
        assert_ne!(root.child(1).child(2), root.child(2).child(1));
        assert_eq!(root.descend(&[3, 4]), root.child(3).child(4));
    }
}
