//! Seed derivation and per-agent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::AgentId;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of integers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Disjoint substreams of one agent's generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Update = 1,
    Crossover = 2,
}

/// The generator for `stream` of `agent` under `seed`. Streams never share
/// output, so drawing from one does not shift another.
pub fn agent_stream(seed: u64, agent: AgentId, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, agent.0 as u64]));
    rng.set_stream(stream as u64);
    rng
}
