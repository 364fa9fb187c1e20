//! Hashing and seeded RNG helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256(data: &[u8]) -> [u8; 32] {
    let digest = Sha256::digest(data);
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(sha256(data))
}

/// Stable 64-bit seed from a master seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut buf = seed.to_le_bytes().to_vec();
    buf.extend_from_slice(label.as_bytes());
    let h = sha256(&buf);
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Independent RNG stream for `label` under `seed`.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// SHA-256 of the compact JSON form. Struct fields serialize in declaration
/// order and maps are `BTreeMap`s, so the encoding is canonical.
pub fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes"))
}

/// Whole-word, case-insensitive containment of a (possibly multi-word) phrase.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let words = tokenize(text);
    let target = tokenize(phrase);
    !target.is_empty() && words.windows(target.len()).any(|w| w == target.as_slice())
}

/// Lowercase alphanumeric word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}
