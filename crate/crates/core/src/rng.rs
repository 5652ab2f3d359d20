//! Seed derivation and the per-processor coin streams.
//!
//! All randomness in a run flows from a single 64-bit seed through named
//! sub-streams, so a trace is reproducible from its seed alone no matter
//! how deliveries are interleaved.

use crate::protocol::{Bit, CoinSource, ProcessorId, Round};

/// Sub-stream tags hung off the base seed.
pub mod stream {
    /// Protocol coin flips.
    pub const COINS: u64 = 0x636f_696e;
    /// Adversary private randomness.
    pub const ADVERSARY: u64 = 0x6164_7665;
    /// Input-vector sampling for randomized trials.
    pub const INPUTS: u64 = 0x696e_7075;
    /// State fuzzing for property checks.
    pub const FUZZ: u64 = 0x6675_7a7a;
    /// Per-trial execution seeds.
    pub const TRIAL: u64 = 0x7472_6c73;
}

/// The 64-bit finalizer from SplitMix64. Bijective with strong diffusion.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from `(base, tag, index)`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    mix(mix(base ^ mix(tag)) ^ index)
}

/// Deterministic coin stream keyed by `(seed, pid, reset_count, round)`.
///
/// Each processor flips at most one coin per `(reset_count, round)` pair,
/// so the key tuple uniquely addresses every flip in a run.
#[derive(Debug, Clone, Copy)]
pub struct SeededCoins {
    seed: u64,
}

impl SeededCoins {
    pub fn new(base_seed: u64) -> Self {
        SeededCoins {
            seed: derive_seed(base_seed, stream::COINS, 0),
        }
    }
}

impl CoinSource for SeededCoins {
    fn flip(&mut self, pid: ProcessorId, reset_count: u32, round: Round) -> Bit {
        let key = mix(mix(mix(self.seed ^ u64::from(pid)) ^ u64::from(reset_count)) ^ u64::from(round));
        (key & 1) as Bit
    }
}
