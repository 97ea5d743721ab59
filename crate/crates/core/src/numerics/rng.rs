//! Counter-style random stream derivation.
//!
//! Every `(master_seed, stream_id, substream_id)` triple is hashed into an
//! independent ChaCha8 key, so a trial's draws depend only on its own indices
//! and never on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::special::std_normal_quantile;

/// Identifies one reproducible sequence of random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_id: u64,
    pub substream_id: u64,
}

impl RandomStream {
    /// Substream carrying the Gaussian signal noise.
    pub const SIGNAL_NOISE: u64 = 0;
    /// Substream carrying the dither.
    pub const DITHER: u64 = 1;
    /// Substream carrying the per-trial signal location.
    pub const LOCATION: u64 = 2;

    pub fn new(master_seed: u64, stream_id: u64, substream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            substream_id,
        }
    }

    pub fn with_substream(self, substream_id: u64) -> Self {
        Self {
            substream_id,
            ..self
        }
    }

    pub fn generator(&self) -> StreamRng {
        let mut state = splitmix64(self.master_seed ^ 0x6469_7468_6572_6c61);
        state = splitmix64(state ^ self.stream_id);
        state = splitmix64(state ^ self.substream_id.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        StreamRng {
            inner: ChaCha8Rng::from_seed(key),
        }
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator bound to one [`RandomStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform draw on the open interval (0, 1), 53-bit resolution.
    pub fn open01(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `(lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.open01()
    }

    /// Standard normal draw by inverse-CDF transform.
    pub fn standard_normal(&mut self) -> f64 {
        std_normal_quantile(self.open01())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
