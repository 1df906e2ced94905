//! Counter-based random streams.
//!
//! Every random decision in a protocol run is drawn from a stream keyed by
//! the master seed and the logical coordinates of the decision (sample,
//! timestep, gate position, ...). Results therefore do not depend on the
//! order in which samples or gates are evaluated, nor on the worker count.

use rand::{Error as RandError, RngCore};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hierarchical key for a random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        StreamKey(mix64(master_seed ^ 0x6a09_e667_f3bc_c908))
    }

    /// Derives a child key for one more coordinate.
    #[inline]
    pub fn with(self, coordinate: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(coordinate.wrapping_add(GOLDEN))))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> StreamRng {
        StreamRng {
            key: self.0,
            counter: 0,
        }
    }
}

/// SplitMix64-style generator whose output is a pure function of
/// `(key, counter)`.
#[derive(Clone, Debug)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn from_key(key: StreamKey) -> Self {
        key.rng()
    }

    /// Uniform double in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n` without modulo bias.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}
