//! Seeded random streams.
//!
//! Every draw in the crate comes from a stream addressed by
//! `(seed, epoch, index)`. Sequential algorithms consume epochs in order;
//! within an epoch particle `i` owns the stream at index `i`, so per-particle
//! work gives the same bits whether it runs serially or on a thread pool.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomStreams {
    seed: u64,
    next_epoch: u64,
}

impl RandomStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            next_epoch: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of epochs handed out so far.
    pub fn epochs_used(&self) -> u64 {
        self.next_epoch
    }

    pub fn next_epoch(&mut self) -> Epoch {
        let epoch = self.next_epoch;
        self.next_epoch += 1;
        Epoch {
            key: mix(mix(self.seed) ^ epoch.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Epoch {
    key: u64,
}

impl Epoch {
    /// Independent generator for `index` within this epoch.
    pub fn stream(&self, index: u64) -> StreamRng {
        StreamRng::seed_from_u64(mix(self.key ^ mix(index.wrapping_mul(GOLDEN_GAMMA))))
    }

    /// Generator for work that is not tied to a particle (resampling, chains).
    pub fn shared(&self) -> StreamRng {
        self.stream(u64::MAX)
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draw from N(mean, var); `var == 0` returns `mean` without consuming randomness.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    if var == 0.0 {
        mean
    } else {
        mean + var.sqrt() * standard_normal(rng)
    }
}
