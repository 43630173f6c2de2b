//! Deterministic randomness plumbing.
//!
//! Everything stochastic in this crate — kernel generation, simulated
//! networks, Monte-Carlo experiments — flows from a [`RandomSource`]: a
//! 64-bit seed plus a pinned generator algorithm (ChaCha8). Identical
//! sources produce identical byte streams on every platform, which makes
//! kernels bit-reproducible and experiments replayable from their header
//! metadata alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The pinned generator identifier written into kernel file headers.
pub const RNG_ALGORITHM: &str = "chacha8";

/// A reproducible randomness source: seed + pinned algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    /// The stream seed.
    pub seed: u64,
}

impl RandomSource {
    /// Source for the given seed.
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The generator algorithm identifier ("chacha8").
    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Instantiate the generator at the start of its stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Derive an independent child source, labeled by an index.
    ///
    /// Children are used where streams must be regenerable out of order —
    /// e.g. per-layer weights that the backward pass re-materializes
    /// without storing. The derivation is a SplitMix64 mix of seed and
    /// index, so children neither collide with nor overlap the parent
    /// stream for any practical workload.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }
}

/// SplitMix64 finalizer: a bijective 64-bit mix with good avalanche.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
