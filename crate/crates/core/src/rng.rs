//! Reproducible, splittable random streams.
//!
//! A stream is the pair `(master_seed, stream_index)`. The generator behind it is
//! ChaCha8 keyed by the master seed with the stream index selecting the ChaCha
//! stream, so distinct indices give non-overlapping sequences and no state has to
//! be shared between parallel tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

pub(crate) const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        RngStream {
            master_seed,
            stream_index: 0,
        }
    }

    /// Child stream for replicate `replicate_id`; a pure function of `(self, replicate_id)`.
    pub fn derive(&self, replicate_id: u64) -> RngStream {
        let child = splitmix64(self.stream_index ^ splitmix64(replicate_id.wrapping_add(GOLDEN)));
        RngStream {
            master_seed: self.master_seed,
            stream_index: child,
        }
    }

    /// Child stream keyed by a short label, for separating the roles of one task.
    pub fn derive_named(&self, label: &str) -> RngStream {
        let h = label
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3));
        self.derive(h)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Counter-based uniforms keyed by arbitrary words, independent of call order.
    pub fn keyed(&self) -> KeyedUniform {
        KeyedUniform {
            key: splitmix64(self.master_seed ^ splitmix64(self.stream_index)),
        }
    }
}

/// Stateless hash-based uniform generator: `uniform(words)` depends only on the
/// stream key and `words`.
#[derive(Debug, Clone, Copy)]
pub struct KeyedUniform {
    key: u64,
}

impl KeyedUniform {
    #[inline]
    pub fn hash(&self, words: &[u64]) -> u64 {
        let mut h = self.key;
        for &w in words {
            h = splitmix64(h ^ splitmix64(w));
        }
        splitmix64(h)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&self, words: &[u64]) -> f64 {
        (self.hash(words) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
