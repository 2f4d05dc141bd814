//! Seedable, counter-based randomness for decode runs.
//!
//! [`DecodeRng`] wraps ChaCha8 keyed by a 64-bit seed and a 64-bit stream id.
//! State-advance contract: draw number `i` (0-based) consumes exactly the
//! 32-bit keystream words `2i` and `2i + 1`, combined little-endian into a
//! `u64`, and maps it to `[0, 1)` as `(x >> 11) * 2^-53`. Every uniform is
//! therefore a pure function of `(seed, stream, i)` and can be replayed with
//! [`DecodeRng::at`].

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct DecodeRng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
    draws: u64,
}

impl DecodeRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` under the same seed (used for BoN
    /// trajectories and Monte-Carlo replicas).
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            seed,
            stream,
            draws: 0,
        }
    }

    /// Positions a generator so that its next draw is draw number `draw_index`.
    pub fn at(seed: u64, stream: u64, draw_index: u64) -> Self {
        let mut rng = Self::with_stream(seed, stream);
        rng.inner.set_word_pos(2 * draw_index as u128);
        rng.draws = draw_index;
        rng
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of uniforms drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.inner.next_u64() >> 11) as f64 * UNIT
    }
}

/// SplitMix64 finalizer. Used for stable hashing of token states.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a sequence of values into a 64-bit hash, order-sensitive.
#[inline]
pub fn hash_seq<I: IntoIterator<Item = u64>>(seed: u64, items: I) -> u64 {
    items
        .into_iter()
        .fold(mix64(seed), |h, v| mix64(h ^ mix64(v.wrapping_add(0x51_7CC1_B727_220A))))
}

/// Maps a hash to a uniform in `[0, 1)`.
#[inline]
pub fn hash_to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * UNIT
}
