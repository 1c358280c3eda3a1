//! Deterministic random sub-streams.
//!
//! Every stochastic component of a run draws from its own stream, derived
//! from the run seed and a fixed stream id, so that changing one component
//! (for example the classifier noise) leaves the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    SourceEnv,
    TargetEnv,
    AgentInit,
    Agent,
    Classifier,
    Discriminator,
    Evaluation,
    Expert,
    Replay,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::SourceEnv => 1,
            Stream::TargetEnv => 2,
            Stream::AgentInit => 3,
            Stream::Agent => 4,
            Stream::Classifier => 5,
            Stream::Discriminator => 6,
            Stream::Evaluation => 7,
            Stream::Expert => 8,
            Stream::Replay => 9,
        }
    }
}

/// Independent generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Seeded generator for ad-hoc use (tests, tools).
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
