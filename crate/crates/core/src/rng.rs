//! Counter-based per-path random streams.
//!
//! Every path owns a ChaCha8 stream keyed by `(master_seed, path_index,
//! purpose)`. Draws for path `i` never depend on which worker simulates it,
//! so results are identical for any degree of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams of a path. Keeping them separate means that,
/// e.g., switching jumps on or off leaves the volatility draws untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Volatility = 0,
    Diffusion = 1,
    Jumps = 2,
    Auxiliary = 3,
}

/// Deterministic stream for `(master_seed, path_index, purpose)`.
pub fn path_stream(master_seed: u64, path_index: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((path_index << 2) | purpose as u64);
    rng
}
