//! Counter-based random streams: every (seed, epoch, particle, purpose) tuple
//! gets its own generator, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const INIT: u64 = 1;
pub(crate) const PREDICT: u64 = 2;
pub(crate) const RESAMPLE: u64 = 3;

pub(crate) fn stream(seed: u64, epoch: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&epoch.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(&purpose.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
