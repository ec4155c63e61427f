//! Deterministic random streams.
//!
//! Every random quantity the codec draws is a pure function of a 64-bit
//! `seed`, a 64-bit per-vector `counter` and a [`Stage`] tag. The ChaCha20
//! key holds `seed` and `counter`; the stage selects the ChaCha stream, so
//! the sign diagonal, the dither offset and the residual sign bits of one
//! vector never share keystream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Independent randomness consumers within one encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stage {
    /// Rademacher diagonal of the base stage.
    BaseSigns = 0,
    /// Dither offset `U` of the scalar codebook.
    Dither = 1,
    /// Rademacher diagonal applied to the residual.
    ResidualDiagonal = 2,
    /// Randomized sign bits of the residual quantizer.
    ResidualSignBits = 3,
}

/// Returns the generator for `(seed, counter, stage)`.
pub fn stream_rng(seed: u64, counter: u64, stage: Stage) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&counter.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stage as u64);
    rng
}

/// Generator for test inputs and experiment workloads, disjoint from every [`Stage`].
pub fn auxiliary_rng(seed: u64, counter: u64) -> ChaCha20Rng {
    let mut rng = stream_rng(seed, counter, Stage::BaseSigns);
    rng.set_stream(u64::MAX);
    rng
}

/// Uniform draw from the open interval (0, 1) on a 2^-53 grid offset by half a step.
///
/// Never returns exactly 0 or 1/2, which keeps the unbiased codebook away
/// from its measure-zero endpoint singularities.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let k = rng.next_u64() >> 11;
    (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
