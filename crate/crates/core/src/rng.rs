//! Deterministic RNG streams. Every batch derives per-session generators from
//! a master seed and a stream index so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent child generator from `parent`.
pub fn child<R: rand::RngCore + ?Sized>(parent: &mut R) -> SimRng {
    let mut seed = [0u8; 32];
    parent.fill_bytes(&mut seed);
    ChaCha8Rng::from_seed(seed)
}
