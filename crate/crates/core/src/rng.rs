//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 256-bit seed assembled from four little-endian `u64` words:
//!
//! ```text
//! [ base seed | stream tag | index a | index b ]
//! ```
//!
//! The stream tag separates purposes (graph generation, walks, weight
//! initialization, negative sampling) so that consuming more numbers in one
//! purpose never shifts another. The two index words address sub-streams,
//! e.g. `(node, repetition)` for walks, which makes results independent of
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Purpose tag of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    GraphGen = 1,
    Walks = 2,
    Init = 3,
    Negatives = 4,
    /// Reserved for tests and simulations outside the pipeline.
    Aux = 5,
}

/// Opens the sub-stream `(a, b)` of `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream, a: u64, b: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Stable 64-bit digest of a sequence of byte strings (SHA-256, first eight
/// bytes little-endian). Parts are length-prefixed so concatenation is
/// unambiguous.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}
