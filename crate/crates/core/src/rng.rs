//! Seeded, purpose-separated random streams.
//!
//! Every consumer of randomness owns its own stream, derived from an
//! explicit seed and a domain tag, so runs are reproducible and the
//! iterate-selection draw is independent of gradient noise.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

const TAG_SAMPLING: u64 = 0x01;
const TAG_OUTPUT: u64 = 0x02;
const TAG_PROBLEM: u64 = 0x03;
const TAG_CHECK: u64 = 0x04;

impl RngStream {
    fn with_tag(seed: u64, tag: u64) -> Self {
        // splitmix-style mixing so nearby seeds give unrelated streams
        let mut z = seed.wrapping_add(tag.wrapping_mul(0x9e3779b97f4a7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        RngStream(ChaCha8Rng::seed_from_u64(z))
    }

    /// Gradient-noise stream of one run.
    pub fn sampling(seed: u64) -> Self {
        Self::with_tag(seed, TAG_SAMPLING)
    }

    /// Stream for the uniform output-iterate draw.
    pub fn output(seed: u64) -> Self {
        Self::with_tag(seed, TAG_OUTPUT)
    }

    /// Dataset-generation stream.
    pub fn problem(seed: u64) -> Self {
        Self::with_tag(seed, TAG_PROBLEM)
    }

    /// Stream for randomized verification checks.
    pub fn check(seed: u64) -> Self {
        Self::with_tag(seed, TAG_CHECK)
    }

    pub fn gen_range<T, R>(&mut self, range: R) -> T
    where
        T: rand::distributions::uniform::SampleUniform,
        R: rand::distributions::uniform::SampleRange<T>,
    {
        self.0.gen_range(range)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}
