//! Seeded random streams.
//!
//! A run seed fans out into independent ChaCha8 streams. The 64-bit stream id is
//! `(purpose << 32) | index`, so layer 3 of the weights and sample 3 of a
//! Monte-Carlo run never share a stream, and parallel jobs reproduce bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Dataset = 1,
    Weights = 2,
    Output = 3,
    MonteCarlo = 4,
    Auxiliary = 5,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | (index & 0xffff_ffff));
    rng
}

/// Standard normal draws (ziggurat) from an owned generator.
#[derive(Clone, Debug)]
pub struct Gaussian<R> {
    rng: R,
}

impl<R: Rng> Gaussian<R> {
    pub fn new(rng: R) -> Self {
        Gaussian { rng }
    }

    pub fn sample(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill(&mut self, out: &mut [f64], std: f64) {
        for x in out.iter_mut() {
            *x = std * self.rng.sample::<f64, _>(StandardNormal);
        }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

pub fn gaussian_stream(seed: u64, purpose: Purpose, index: u64) -> Gaussian<ChaCha8Rng> {
    Gaussian::new(stream(seed, purpose, index))
}
