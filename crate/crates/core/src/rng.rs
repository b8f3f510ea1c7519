//! Seeded generators.
//!
//! Every random draw in the crate goes through a [`ChaCha8Rng`] so that a
//! `(seed, stream)` pair fully determines a run. Optimizers split their
//! randomness into independent streams (batch sampling, x-noise, y-noise and
//! output selection) so that two algorithms run under the same seed share
//! their batch sequence.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream used for mini-batch index sampling.
pub const STREAM_BATCH: u64 = 0;
/// Stream used for noise injected into the x-update.
pub const STREAM_NOISE_X: u64 = 1;
/// Stream used for noise injected into the y-update or y-output.
pub const STREAM_NOISE_Y: u64 = 2;
/// Stream used to pick the returned iterate.
pub const STREAM_SELECT: u64 = 3;
/// Stream used by problem constructors for synthetic data.
pub const STREAM_DATA: u64 = 4;
/// Stream used for the inner ascent loop's mini-batches.
pub const STREAM_INNER_BATCH: u64 = 5;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
