//! Seeded random streams. Every trial draws from its own ChaCha stream keyed
//! by `(master_seed, stream)`, so results do not depend on how trials are
//! split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn trial_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids reserved for non-trial draws (scenario placement, random
/// combiners) so they never collide with trial indices.
pub mod streams {
    pub const PLACEMENT: u64 = 1 << 62;
    pub const RANDOM_PHASE: u64 = (1 << 62) + 1;
}
