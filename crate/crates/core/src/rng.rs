//! Seeded random streams.
//!
//! A stream is identified by `(root_seed, stream_id)`. The generator is
//! ChaCha8, whose native 64-bit stream parameter carries `stream_id`, so
//! distinct ids address disjoint keystreams under the same key.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    root_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

/// Deterministically derive the stream `stream_id` of `root_seed`.
pub fn derive_stream(root_seed: u64, stream_id: u64) -> RngStream {
    RngStream::derive(root_seed, stream_id)
}

impl RngStream {
    pub fn derive(root_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(root_seed);
        inner.set_stream(stream_id);
        RngStream {
            root_seed,
            stream_id,
            inner,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Draw a fresh root seed for a family of per-index child streams.
    ///
    /// Parallel loops call this once and then derive `(seed, index)` for each
    /// work item, which keeps results independent of scheduling.
    pub fn fork_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
