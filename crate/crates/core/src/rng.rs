//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed through
//! `SeedableRng::seed_from_u64`. The algorithm is portable and fixed: the same
//! seed yields the same draws on every platform and build configuration.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::qlinalg::C64;

/// Single-owner deterministic random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream; advances `self` by one draw.
    pub fn fork(&mut self) -> RngStream {
        RngStream::new(self.inner.next_u64())
    }

    /// Raw 64-bit draw, for seeding child streams.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard complex Gaussian: real and imaginary parts N(0, 1/2).
    pub fn complex_normal(&mut self) -> C64 {
        let re: f64 = StandardNormal.sample(&mut self.inner);
        let im: f64 = StandardNormal.sample(&mut self.inner);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
