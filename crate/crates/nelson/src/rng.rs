//! Reproducible per-walker random streams.
//!
//! Every walker owns an independent ChaCha stream selected by walker id,
//! all derived from one master seed. Stream separation means the draw
//! sequence of one walker never depends on how many other walkers exist or
//! which threads stepped them, which is what makes runs bit-reproducible
//! across thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn walker_rng(master_seed: u64, walker_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(walker_id);
    rng
}
