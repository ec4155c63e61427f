//! Normalized Walsh–Hadamard transform and the randomized `HD` rotation.
//!
//! `H` is the Sylvester Hadamard matrix scaled by `d^{-1/2}`, so it is
//! symmetric and orthonormal: `Hᵀ = H = H⁻¹`. The butterfly runs on raw sums
//! and differences; the `d^{-1/2}` scale is a single pass at the end, which
//! keeps the butterfly exact for integer-valued inputs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stage};

/// Diagonal matrix of independent Rademacher signs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDiagonal {
    signs: Vec<f64>,
}

impl SignDiagonal {
    /// Builds a diagonal from explicit `±1` entries.
    pub fn from_signs(signs: Vec<f64>) -> Result<Self> {
        check_pow2(signs.len())?;
        if let Some(i) = signs.iter().position(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::MalformedCode(format!("sign {i} is {}, expected ±1", signs[i])));
        }
        Ok(Self { signs })
    }

    /// All-`+1` diagonal (the identity).
    pub fn identity(d: usize) -> Result<Self> {
        check_pow2(d)?;
        Ok(Self { signs: vec![1.0; d] })
    }

    /// Draws `d` independent signs from `rng`, 64 per word.
    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Self> {
        check_pow2(d)?;
        let mut signs = Vec::with_capacity(d);
        while signs.len() < d {
            let word = rng.next_u64();
            let take = (d - signs.len()).min(64);
            signs.extend((0..take).map(|bit| if (word >> bit) & 1 == 1 { 1.0 } else { -1.0 }));
        }
        Ok(Self { signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    fn flip(&self, v: &mut [f64]) {
        for (x, s) in v.iter_mut().zip(&self.signs) {
            *x *= s;
        }
    }
}

/// Deterministic sign diagonal for `(seed, stream_id)`.
///
/// The base stage of vector `c` uses `sample_signs(seed, c, d)`.
pub fn sample_signs(seed: u64, stream_id: u64, d: usize) -> Result<SignDiagonal> {
    SignDiagonal::from_rng(&mut stream_rng(seed, stream_id, Stage::BaseSigns), d)
}

fn check_pow2(d: usize) -> Result<()> {
    if d.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::NotPowerOfTwo(d))
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// In-place normalized fast Walsh–Hadamard transform, `O(d log d)`.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let d = v.len();
    check_pow2(d)?;
    let mut h = 1;
    while h < d {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    if d > 1 {
        let scale = 1.0 / (d as f64).sqrt();
        v.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(())
}

/// Returns `Hv`.
pub fn fwht_normalized(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// In-place `x ← H D x`.
pub fn apply_hd_in_place(x: &mut [f64], diag: &SignDiagonal) -> Result<()> {
    check_len(diag.len(), x.len())?;
    diag.flip(x);
    fwht_in_place(x)
}

/// In-place `y ← D Hᵀ y`.
pub fn apply_hd_inverse_in_place(y: &mut [f64], diag: &SignDiagonal) -> Result<()> {
    check_len(diag.len(), y.len())?;
    fwht_in_place(y)?;
    diag.flip(y);
    Ok(())
}

/// Returns `H D x`.
pub fn apply_hd(x: &[f64], diag: &SignDiagonal) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    apply_hd_in_place(&mut out, diag)?;
    Ok(out)
}

/// Returns `D Hᵀ y`, the inverse of [`apply_hd`].
pub fn apply_hd_inverse(y: &[f64], diag: &SignDiagonal) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    apply_hd_inverse_in_place(&mut out, diag)?;
    Ok(out)
}
