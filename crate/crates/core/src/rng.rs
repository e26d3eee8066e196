//! Deterministic keyed randomness.
//!
//! Every random quantity in the environment is a pure function of a 64-bit
//! key obtained by chaining identifiers (seed, site, dyadic node) through a
//! SplitMix64-style mixer. Sampler workers get independent counter-based
//! ChaCha streams derived from `(master_seed, worker_index)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function: bijective, strong avalanche.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold one word into a running key.
#[inline]
pub fn chain(key: u64, word: u64) -> u64 {
    mix(key.rotate_left(23) ^ word)
}

/// Uniform in `(0, 1]` from the high 53 bits.
#[inline]
pub fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[0, 1)` from the high 53 bits.
#[inline]
pub fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal as a pure function of `key` (Box-Muller on two derived
/// words).
#[inline]
pub fn standard_normal(key: u64) -> f64 {
    let u1 = unit_open(mix(key ^ 0xA076_1D64_78BD_642F));
    let u2 = unit(mix(key ^ 0xE703_7ED1_A0B4_28DB));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Independent stream for worker `worker` under `master_seed`.
///
/// ChaCha is counter-based, so streams can be replayed and never overlap for
/// distinct `(master_seed, worker)` pairs.
pub fn worker_rng(master_seed: u64, worker: u64) -> ChaCha8Rng {
    let mut key = chain(chain(master_seed, 0x574f_524b), worker);
    let mut seed = [0u8; 32];
    for bytes in seed.chunks_mut(8) {
        key = mix(key);
        bytes.copy_from_slice(&key.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Environment seed for the `index`-th replication under `master_seed`.
pub fn env_seed(master_seed: u64, index: u64) -> u64 {
    chain(chain(master_seed, 0x454e_5653), index)
}
