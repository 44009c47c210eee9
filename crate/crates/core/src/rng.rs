//! Seeded random streams.
//!
//! One seed fans out into independent ChaCha8 streams, one per consumer, so
//! that e.g. changing the dropout rate does not perturb negative sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Corruption = 2,
    Sampling = 3,
    Dropout = 4,
    Shuffle = 5,
    Synthetic = 6,
}

#[derive(Debug, Clone)]
pub struct RngStreams {
    seed: u64,
    pub init: ChaCha8Rng,
    pub corruption: ChaCha8Rng,
    pub sampling: ChaCha8Rng,
    pub dropout: ChaCha8Rng,
    pub shuffle: ChaCha8Rng,
}

/// A single stream for `seed`.
pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            init: stream(seed, Stream::Init),
            corruption: stream(seed, Stream::Corruption),
            sampling: stream(seed, Stream::Sampling),
            dropout: stream(seed, Stream::Dropout),
            shuffle: stream(seed, Stream::Shuffle),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}
