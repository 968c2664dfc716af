//! Deterministic RNG streams.
//!
//! Every stochastic operation in this crate takes an explicit RNG, and the
//! experiment drivers derive one independent stream per (cell, purpose) pair
//! from a single master seed. ChaCha streams guarantee the per-cell sequences
//! never overlap, so replicates can run in any order (or in parallel) without
//! changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate. Fixed (not `StdRng`) so that a seed
/// reproduces the same numbers across toolchain upgrades.
pub type Rng = ChaCha8Rng;

/// Create the RNG for `(master seed, stream id)`.
pub fn stream(master: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Stream ids for the common experiment roles. Cell ids are spaced so the
/// per-role offsets below never collide between cells.
pub const STREAMS_PER_CELL: u64 = 8;

pub const ROLE_TOPOLOGY: u64 = 0;
pub const ROLE_WEIGHTS: u64 = 1;
pub const ROLE_TRAINING: u64 = 2;
pub const ROLE_DATA: u64 = 3;

/// RNG for role `role` of cell `cell` under `master`.
pub fn cell_stream(master: u64, cell: u64, role: u64) -> Rng {
    debug_assert!(role < STREAMS_PER_CELL);
    stream(master, cell * STREAMS_PER_CELL + role)
}
