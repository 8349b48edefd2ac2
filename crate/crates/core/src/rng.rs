//! Seeded random streams.
//!
//! Every random consumer draws from a ChaCha8 stream addressed by
//! `(seed, purpose, iteration, index)`. Work items own their streams, so
//! results do not depend on how items are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams of a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init,
    Data,
    Shuffle,
    Eval,
    Sample,
    Variance,
    Problem,
    Check,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x1,
            Purpose::Data => 0x2,
            Purpose::Shuffle => 0x3,
            Purpose::Eval => 0x4,
            Purpose::Sample => 0x5,
            Purpose::Variance => 0x6,
            Purpose::Problem => 0x7,
            Purpose::Check => 0x8,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A run seed that fans out into independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for work item `index` of `purpose` in outer iteration `iteration`.
    pub fn rng(&self, purpose: Purpose, iteration: u64, index: u64) -> Rng {
        let key = splitmix64(splitmix64(self.seed ^ purpose.tag().rotate_left(56)) ^ iteration);
        let mut rng = Rng::seed_from_u64(key);
        rng.set_stream(index);
        rng
    }
}
