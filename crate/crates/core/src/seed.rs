//! Stable seed derivation.
//!
//! Seeds are the first eight bytes of a SHA-256 digest over tagged parts, so
//! they do not depend on the standard library's hasher and stay fixed across
//! toolchains and platforms.

use sha2::{Digest, Sha256};

pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed of one generated sample. Adding settings or levels to a run never
/// changes the seeds of samples that were already present.
pub fn sample_seed(master: u64, slice: usize, setting: &str, level: u8) -> u64 {
    derive_seed(master, &format!("sample/{slice}/{setting}/{level}"))
}

pub fn phantom_seed(master: u64, slice: usize) -> u64 {
    derive_seed(master, &format!("phantom/{slice}"))
}
