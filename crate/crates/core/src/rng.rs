//! Seeded randomness shared by every stochastic routine in the crate.
//!
//! All streams are ChaCha8 keyed by a 64-bit seed. Independent substreams are
//! derived by mixing a parent seed with one or more stream indices through the
//! SplitMix64 finalizer, so parallel work can draw from `(seed, index)` without
//! depending on scheduling order. Bounded integers use rejection sampling on raw
//! `u64` draws rather than `Rng::random_range`, which keeps shuffles stable even
//! if the `rand` sampling internals change.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of stream indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(seed), |acc, &idx| mix64(acc ^ mix64(idx.wrapping_add(0xA5A5_A5A5))))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Uniform integer in `[0, bound)`; `bound` must be nonzero.
pub fn below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0, "bound must be positive");
    // reject the low tail so every residue class has equal mass
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let r = rng.next_u64();
        if r >= threshold {
            return r % bound;
        }
    }
}

/// Uniform real in `[0, 1)` with 53 bits of precision.
pub fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// In-place Fisher–Yates shuffle (Durstenfeld's variant, walking down from the end).
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// `0..n` in a seeded shuffled order.
pub fn permutation(n: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut idx);
    idx
}

/// `count` distinct indices from `0..n`, returned in ascending order.
pub fn sample_sorted(n: usize, count: usize, rng: &mut impl RngCore) -> Vec<usize> {
    let count = count.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher–Yates: the first `count` slots end up uniformly sampled
    for i in 0..count {
        let j = i + below(rng, (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx.sort_unstable();
    idx
}
