//! Seeded random streams.
//!
//! Every experiment has one root seed; run `i` draws from a ChaCha8 stream
//! seeded with `root ^ i`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn run_seed(root_seed: u64, run_index: usize) -> u64 {
    root_seed ^ run_index as u64
}

pub fn run_rng(root_seed: u64, run_index: usize) -> SimRng {
    seeded(run_seed(root_seed, run_index))
}
