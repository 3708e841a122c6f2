//! Seed derivation.
//!
//! Every random stage draws from `derive_seed(top_level_seed, stage_label)`:
//! the first eight bytes (little endian) of SHA-256 over the seed's
//! little-endian bytes followed by the label. Stages are therefore
//! independent of each other and of execution order.

use sha2::{Digest, Sha256};

pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// Lowercase hex SHA-256 of `text`.
pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
