//! Counter-derived random streams: one independent ChaCha stream per
//! (run, entity) pair, all keyed by a single master seed. Results are
//! reproducible bit-for-bit regardless of how runs are scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Entities that consume randomness inside one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Steps = 0,
    Combination = 1,
    Regressors = 2,
    Noise = 3,
}

/// Derives the stream for `(run, entity)` under `master_seed`.
pub fn stream(master_seed: u64, run: u64, entity: Entity) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(b"asyncdif");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(run.wrapping_mul(8).wrapping_add(entity as u64));
    rng
}
