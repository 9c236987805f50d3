//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a master seed and selected
//! by a 64-bit stream index, so parallel work items can each own a
//! stream without sharing state. Results never depend on scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stateful uniform generator handed to models and samplers.
pub type Stream = ChaCha8Rng;

/// Stream-index namespaces, so different experiment stages never collide.
pub mod domain {
    pub const HARVEST: u64 = 1;
    pub const FIRST_BLOCK: u64 = 2;
    pub const PATHS: u64 = 3;
    pub const ENVIRONMENTS: u64 = 4;
    pub const QUENCHED_WALKS: u64 = 5;
    pub const CENTERING: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Stream `index` inside namespace `domain`. The domain occupies the top
    /// byte of the stream index.
    pub fn for_domain(master_seed: u64, domain: u64, index: u64) -> Self {
        debug_assert!(index < (1 << 56));
        Self::new(master_seed, (domain << 56) | index)
    }

    pub fn stream(&self) -> Stream {
        make_stream(*self)
    }
}

pub fn make_stream(spec: SeedSpec) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(spec.stream_index);
    rng
}
