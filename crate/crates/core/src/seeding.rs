//! Seed fan-out. One master seed per replica is split into named,
//! independent substreams so that e.g. the topology can be held fixed while
//! exploration varies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams derived from a replica's master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology,
    Dynamics,
    Exploration,
    WeightInit,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Topology => 0x746f_706f,
            Stream::Dynamics => 0x6479_6e61,
            Stream::Exploration => 0x6578_706c,
            Stream::WeightInit => 0x7769_6e69,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a seed with an index (stream tag, episode number, step...).
pub fn derive(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn substream(master: u64, stream: Stream) -> u64 {
    derive(master, stream.tag())
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
