//! Seeded, splittable random streams.
//!
//! Every stochastic quantity in the toolkit (codebooks, noise, source
//! phases, derived per-point seeds) draws from its own ChaCha substream so
//! that results are bit-reproducible regardless of evaluation order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream domains. Each domain gets a disjoint ChaCha stream id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Per-RIS codebook generation; index = RIS index.
    Codebook = 1,
    /// Measurement noise; index 0.
    Noise = 2,
    /// Source phase assignment; index 0.
    SourcePhase = 3,
    /// Anything a sweep point derives locally.
    Sweep = 4,
}

/// Deterministic generator for `(seed, domain, index)`.
///
/// The stream id packs the domain into the high bits so substreams never
/// collide across domains.
pub fn substream(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ (index & 0x0000_FFFF_FFFF_FFFF));
    rng
}

/// SplitMix64 step; used to derive independent per-point seeds from a
/// master seed without consuming the master stream.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
