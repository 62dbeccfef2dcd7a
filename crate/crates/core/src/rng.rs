//! Named deterministic random streams.
//!
//! All randomness in an experiment flows from a single master seed. Each
//! consumer (network generator, reward generator, per-node engine noise,
//! block permutations, ...) asks for a stream by name; the stream seed is a
//! SHA-256 digest of the master seed and the name, so streams are mutually
//! independent and insensitive to the order in which they are created.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Factory for named deterministic RNG streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        SeedStream { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Derive the RNG for `name`. The same `(master, name)` pair always
    /// yields the same generator.
    pub fn stream(&self, name: &str) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update([0x1f]);
        hasher.update(name.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }

    /// Indexed helper for per-node streams, e.g. `engine.node.3`.
    pub fn indexed(&self, prefix: &str, index: usize) -> ChaCha12Rng {
        self.stream(&format!("{prefix}.{index}"))
    }
}

/// Hex SHA-256 of arbitrary bytes; used to stamp outputs with the hash of
/// the configuration that produced them.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
