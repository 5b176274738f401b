//! Seeded, splittable random streams.
//!
//! Every randomized operation takes an explicit [`Stream`]. Parallel work
//! receives disjoint sub-streams from [`split`]: a fresh 256-bit key is drawn
//! from the parent and each task gets the ChaCha stream id equal to its
//! index, so results depend only on `(seed, task index)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

/// Root stream for a 64-bit experiment seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha20Rng::seed_from_u64(seed)
}

/// A key drawn once from a parent stream; sub-stream `i` is a pure
/// function of the key and `i`.
pub struct Splitter {
    key: [u8; 32],
}

impl Splitter {
    /// Advances the parent once.
    pub fn new(parent: &mut Stream) -> Self {
        let mut key = [0u8; 32];
        parent.fill_bytes(&mut key);
        Self { key }
    }

    pub fn stream(&self, i: u64) -> Stream {
        let mut child = ChaCha20Rng::from_seed(self.key);
        child.set_stream(i);
        child
    }
}

/// Derives `count` independent sub-streams, advancing the parent once.
pub fn split(parent: &mut Stream, count: usize) -> Vec<Stream> {
    let splitter = Splitter::new(parent);
    (0..count as u64).map(|i| splitter.stream(i)).collect()
}

/// Sub-stream for a single task index of a master seed.
pub fn task_stream(seed: u64, task: u64) -> Stream {
    let mut child = stream(seed);
    child.set_stream(task.wrapping_add(1));
    child
}

/// Uniform draw on the open interval (0, 1) from one 64-bit word.
///
/// Uses the top 53 bits plus a half-ulp offset, so 0 and 1 are never hit
/// and the mapping is identical on every platform.
pub fn uniform_open(rng: &mut Stream) -> f64 {
    let bits = rng.next_u64() >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
