//! Deterministic random streams.
//!
//! Every generator in a session is a ChaCha8 stream whose 32-byte key is
//! `SHA-256("collusion-stream-v1" || master || session || stream)`, with
//! the three integers encoded as little-endian `u64`. Stream 0 drives the
//! environment (buyer draws and tie-breaks); stream `1 + i` drives firm
//! `i`'s exploration and greedy tie-breaks. The derivation is part of the
//! output format: changing it changes every result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"collusion-stream-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionSeed {
    pub master: u64,
    pub session: u64,
}

impl SessionSeed {
    pub fn new(master: u64, session: u64) -> Self {
        Self { master, session }
    }

    pub fn environment_rng(&self) -> ChaCha8Rng {
        stream_rng(self.master, self.session, 0)
    }

    pub fn firm_rng(&self, firm: usize) -> ChaCha8Rng {
        stream_rng(self.master, self.session, 1 + firm as u64)
    }
}

pub fn stream_rng(master: u64, session: u64, stream: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master.to_le_bytes());
    hasher.update(session.to_le_bytes());
    hasher.update(stream.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Seed of grid point `index` in a sweep whose master seed is `master`.
pub fn derive_point_seed(master: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"collusion-sweep-v1");
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
