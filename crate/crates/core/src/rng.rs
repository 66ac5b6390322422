//! Seeded random streams.
//!
//! Every random draw in the crate goes through an explicitly passed
//! [`RngStream`]. Substreams are derived from the seed alone, so the draws of
//! one consumer never depend on how much another consumer has drawn.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream identified by `tag`, derived from this stream's seed.
    pub fn substream(&self, tag: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0xA5A5_5A5A))))
    }

    /// Uniform draw from `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        self.rng.gen_range(lo..=hi)
    }

    /// Uniform draw from `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        mean + std_dev * z
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        let xs: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn substreams_ignore_parent_position() {
        let a = RngStream::new(7);
        let mut b = RngStream::new(7);
        for _ in 0..10 {
            b.unit();
        }
        assert_eq!(a.substream(3).next_u64(), b.substream(3).next_u64());
        assert_ne!(a.substream(3).next_u64(), a.substream(4).next_u64());
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut r = RngStream::new(1);
        for _ in 0..1000 {
            let x = r.uniform(-0.25, 0.25);
            assert!((-0.25..=0.25).contains(&x));
        }
        assert_eq!(r.uniform(3.0, 3.0), 3.0);
    }
}
