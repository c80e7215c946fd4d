//! SplitMix64, the sign generator behind every Monte-Carlo estimate.
//!
//! Output `i` (0-based) of the stream seeded with `s` is
//! `mix(s + (i + 1) * 0x9E3779B97F4A7C15)` in wrapping 64-bit arithmetic,
//! where `mix` is the finalizer
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! A Rademacher sign is `-1` when the top bit of the output is set and `+1`
//! otherwise. Because the state advances by a constant, jumping to output `i`
//! is a single multiply, so a parallel chunk starting at sample `j` seeds
//! itself at stream position `j * N` without touching earlier chunks.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator positioned so that its next output is output `index` of the
    /// stream seeded with `seed`.
    pub fn at(seed: u64, index: u64) -> Self {
        Self {
            state: seed.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 1 {
            -1.0
        } else {
            1.0
        }
    }
}
