//! Seeded randomness. Every stochastic step takes an explicit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-seed for a named sub-task, stable across runs.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

/// Up to `k` items chosen uniformly without replacement, returned in input order.
pub fn sample_sorted<T: Copy>(items: &[T], k: usize, rng: &mut Rng) -> Vec<T> {
    if k >= items.len() {
        return items.to_vec();
    }
    let mut idx = rand::seq::index::sample(rng, items.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i]).collect()
}
