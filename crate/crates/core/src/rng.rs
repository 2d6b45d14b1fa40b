//! Seed derivation for independent random streams.
//!
//! An episode seed fans out into named sub-streams so that the channel
//! realization never depends on which policy is running. Streams that must be
//! addressable by a counter (fading slots, frame outcomes) use the ChaCha
//! stream id as the counter, which makes each draw a pure function of
//! `(seed, stream, counter)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Trajectory,
    Blockage,
    Fading,
    Obstacle,
    Policy,
    Outcome,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Trajectory => 0x7472_616a,
            Stream::Blockage => 0x626c_6f63,
            Stream::Fading => 0x6661_6465,
            Stream::Obstacle => 0x6f62_7374,
            Stream::Policy => 0x706f_6c69,
            Stream::Outcome => 0x6f75_7463,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.tag())
}

/// Sequential generator for one sub-stream of an episode.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, stream))
}

/// Generator addressed by `(seed, stream, counter)`; independent of call order.
pub fn keyed_rng(seed: u64, stream: Stream, counter: u64) -> ChaCha8Rng {
    let mut rng = stream_rng(seed, stream);
    rng.set_stream(counter);
    rng
}
