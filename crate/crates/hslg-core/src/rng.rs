//! Seeded, splittable random-number streams.
//!
//! Every experiment owns an `RngStream` (seed plus stream id); per-replica
//! generators come from [`RngStream::substream`], so replica `i` draws the same
//! numbers no matter how work is divided across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Concrete generator type used throughout the crate.
pub type Gen = ChaCha8Rng;

/// Identifier of an independent random stream: a global seed plus a stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Derived stream for replica (or sub-experiment) `index`.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: mix64(self.stream_id, index),
        }
    }

    /// Instantiate the generator positioned at the start of this stream.
    pub fn generator(&self) -> Gen {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(self.stream_id);
        g
    }
}

/// Stable 64-bit mix of two words (splitmix64 finalizer over the pair).
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of an experiment label and replica index into a stream id.
/// (FNV-1a over the label bytes, then mixed with the replica index; does not
/// depend on the standard library's unstable hasher.)
pub fn stream_for(experiment_id: &str, replica: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in experiment_id.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    mix64(h, replica)
}

/// Map replicas `0..reps` in parallel chunks and fold the chunk results in
/// index order. `make` produces one accumulator per chunk; `fold` merges them
/// sequentially, so the result is independent of thread scheduling.
pub fn par_replica_fold<A, T>(
    reps: u64,
    chunk: u64,
    make: impl Fn(std::ops::Range<u64>) -> A + Sync,
    fold: impl FnMut(T, A) -> T,
    init: T,
) -> T
where
    A: Send,
{
    use rayon::prelude::*;
    let chunk = chunk.max(1);
    let n_chunks = reps.div_ceil(chunk);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(reps);
            make(lo..hi)
        })
        .collect();
    parts.into_iter().fold(init, fold)
}
