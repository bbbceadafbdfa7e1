//! Stable seed derivation.
//!
//! Reproducibility guarantees here are byte-level ("same seed, identical
//! output files"), so derived seeds must not depend on anything the standard
//! library is allowed to change between releases. `DefaultHasher` carries no
//! such stability promise; FNV-1a is four lines and pinned forever.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derives a child seed from a base seed, a domain label, and a counter.
/// Distinct domains ("catalog", "rollout", …) get decorrelated streams even
/// when base and counter coincide.
pub(crate) fn derive(base: u64, domain: &str, counter: u64) -> u64 {
    let mut buf = Vec::with_capacity(16 + domain.len());
    buf.extend_from_slice(&base.to_le_bytes());
    buf.extend_from_slice(domain.as_bytes());
    buf.extend_from_slice(&counter.to_le_bytes());
    fnv1a64(&buf)
}

/// A ChaCha8 stream for a derived seed. ChaCha8 is the crate-wide RNG: fast,
/// portable, and identical across platforms for a fixed seed.
pub(crate) fn rng(base: u64, domain: &str, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, domain, counter))
}

/// 64-bit avalanche finalizer (murmur3's fmix64). FNV-1a alone mixes the
/// final bytes weakly — nearly identical inputs land in a narrow band — so
/// anything converted to a probability gets finalized first.
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 33;
    z = z.wrapping_mul(0xff51_afd7_ed55_8ccd);
    z ^= z >> 33;
    z = z.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^= z >> 33;
    z
}

/// Hashes arbitrary text with a seed into a uniform f64 in [0, 1).
/// Used for per-(query, item) noise decisions that must be reproducible and
/// independent of evaluation order.
pub(crate) fn hash_unit(seed: u64, text: &str) -> f64 {
    let mut buf = Vec::with_capacity(8 + text.len());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    let h = mix64(fnv1a64(&buf));
    // Top 53 bits → exactly representable dyadic rational in [0, 1).
    (h >> 11) as f64 / (1u64 << 53) as f64
}
