//! Seeding and random streams.
//!
//! Every random draw in the crate comes from [`SimRng`], which is
//! xoshiro256** seeded through SplitMix64 (`SeedableRng::seed_from_u64`).
//! Child seeds are derived with [`derive_seed`]; the derivation is versioned by
//! [`SEED_SCHEME_VERSION`] and must not change without bumping it, otherwise
//! recorded trajectories stop replaying.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

pub type SimRng = Xoshiro256StarStar;

/// Bumped whenever [`derive_seed`] or stream assignment changes.
pub const SEED_SCHEME_VERSION: u32 = 1;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `mix(root, index) = splitmix64(splitmix64(root) + (index + 1) * GOLDEN_GAMMA)`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Named sub-streams of an episode seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Game = 0,
    NoOps = 1,
    MaskInit = 2,
    Sticky = 3,
    Policy = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    rng_from_seed(derive_seed(seed, stream as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference SplitMix64 generator seeded with 0
        let mut state = 0u64;
        let mut next = || {
            state = state.wrapping_add(GOLDEN_GAMMA);
            splitmix64(state)
        };
        assert_eq!(next(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(next(), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, 0);
        assert_eq!(a, derive_seed(42, 0));
        assert_ne!(a, derive_seed(42, 1));
        assert_ne!(a, derive_seed(43, 0));
    }

    #[test]
    fn streams_are_reproducible() {
        let mut a = stream_rng(9, Stream::Sticky);
        let mut b = stream_rng(9, Stream::Sticky);
        let mut c = stream_rng(9, Stream::Policy);
        let x = a.next_u64();
        assert_eq!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }
}
