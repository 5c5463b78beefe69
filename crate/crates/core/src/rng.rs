//! Per-run random streams.
//!
//! Every run draws from streams derived from `(master seed, run index)`, so a
//! batch of runs is reproducible bit for bit no matter how runs are scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for the base walk's steps.
pub const BASE_STREAM: u64 = 0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSeed {
    pub master: u64,
    pub run: u64,
}

impl RunSeed {
    pub fn new(master: u64, run: u64) -> Self {
        RunSeed { master, run }
    }

    /// The seed reported for this run in emitted records.
    pub fn derived(&self) -> u64 {
        splitmix64(splitmix64(self.master) ^ self.run.wrapping_mul(0xd1b5_4a32_d192_ed03))
    }

    /// Independent ChaCha stream `tag` of this run.
    pub fn stream(&self, tag: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.derived());
        rng.set_stream(tag);
        rng
    }
}
