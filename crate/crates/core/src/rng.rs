//! Deterministic, platform-independent random streams.
//!
//! A [`RandomSource`] is the ChaCha20 stream cipher used as a counter-based
//! generator. The exact construction, which fixes every byte of output:
//!
//! 1. The 256-bit key is four 64-bit words produced by SplitMix64 started at
//!    `master_seed` (state `+= 0x9E3779B97F4A7C15`, then the standard
//!    `30/27/31` xor-shift-multiply finalizer), each written little-endian.
//! 2. The 64-bit ChaCha stream (nonce) is `stream_id`.
//! 3. The block counter starts at zero; 64-bit outputs are consecutive
//!    little-endian pairs of 32-bit keystream words.
//! 4. A uniform `f64` in `[0, 1)` is the top 53 bits of one 64-bit output
//!    times `2^-53`.
//!
//! Streams with different `stream_id` under one seed are distinct ChaCha
//! nonces and therefore share no keystream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Enough to replay a stream from an exact point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamPosition {
    pub seed: u64,
    pub stream_id: u64,
    /// Offset into the stream, in 32-bit keystream words.
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator for `(master_seed, stream_id)`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RandomSource {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut inner = ChaCha20Rng::from_seed(key);
    inner.set_stream(stream_id);
    RandomSource { seed: master_seed, stream_id, inner }
}

impl RandomSource {
    /// Reopens a stream at a recorded position.
    pub fn resume(pos: StreamPosition) -> Self {
        let mut src = derive_stream(pos.seed, pos.stream_id);
        src.inner.set_word_pos(pos.word_pos);
        src
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn position(&self) -> StreamPosition {
        StreamPosition { seed: self.seed, stream_id: self.stream_id, word_pos: self.inner.get_word_pos() }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p` (one uniform draw).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
