//! Deterministic seed derivation.
//!
//! Every random draw in the pipeline goes through a named stream so that
//! results are reproducible across machines and independent of iteration
//! order elsewhere in the program.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derives a generator from a base seed plus a stream label and numeric
/// context (fold, phase, class index and the like).
pub fn stream_rng(seed: u64, label: &str, context: &[u64]) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([label.len() as u8]);
    hasher.update(label.as_bytes());
    for v in context {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(key)
}

/// FNV-1a hash of a string id; stable across platforms, used to fold ids
/// into numeric stream context.
pub fn id_hash(id: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
