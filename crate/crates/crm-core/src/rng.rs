//! Seeded random streams.
//!
//! Every randomized operation in the crate takes a `u64` seed and derives an
//! independent ChaCha8 stream from (seed, purpose, index), so reruns and
//! parallel fan-outs are reproducible regardless of scheduling.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

/// Purpose tags keeping derived streams from colliding across call sites.
pub mod rng_stream {
    pub const SPLIT: u64 = 0x01;
    pub const LOGGING_SUBSET: u64 = 0x02;
    pub const LOG_SAMPLE: u64 = 0x03;
    pub const LOG_ORDER: u64 = 0x04;
    pub const TRAIN_SHUFFLE: u64 = 0x05;
    pub const SYNTH: u64 = 0x06;
}

/// ChaCha8 stream derived from (seed, purpose, index) via splitmix64 mixing.
pub fn derive_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for (slot, salt) in [(0usize, purpose), (8, index), (16, purpose ^ 0x9e37_79b9_7f4a_7c15), (24, index.wrapping_mul(0x2545_f491_4f6c_dd1d))] {
        state = splitmix64(state ^ salt);
        key[slot..slot + 8].copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) with 53 bits of precision.
pub fn uniform_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in [0, bound) without modulo bias (rejection sampling).
pub fn uniform_usize(rng: &mut impl RngCore, bound: usize) -> usize {
    debug_assert!(bound > 0);
    let bound = bound as u64;
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % bound) as usize;
        }
    }
}

/// Fisher-Yates shuffled `0..n`.
pub fn shuffled_indices(n: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_usize(rng, i + 1);
        idx.swap(i, j);
    }
    idx
}
