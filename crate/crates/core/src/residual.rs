//! Residual quantizer: a power-of-two scale code plus, per rotated
//! coordinate, a doubling level and one randomized sign bit.
//!
//! With scale `σ` and rotated residual `v = H D_res r`, coordinate `i` gets
//! the smallest level `ℓᵢ` with `|vᵢ| ≤ σ·2^ℓᵢ` and a sign `λᵢ = +1` with
//! probability `(1 + vᵢ/Rᵢ)/2`, `Rᵢ = σ·2^ℓᵢ`. The decoded value `Rᵢλᵢ` has
//! mean `vᵢ`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stage};
use crate::transform::{apply_hd_in_place, apply_hd_inverse_in_place, SignDiagonal};

/// Upper bound on the Euclidean norm of a residual.
pub const MAX_RESIDUAL_NORM: f64 = 2.0;
const NORM_SLACK: f64 = 1e-12;

/// Residual-stage code. `idx_sigma == 0` marks a negligible residual whose
/// levels and signs are all zero placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualCode {
    pub idx_sigma: u8,
    pub levels: Vec<u8>,
    /// `±1`, or `0` placeholders when `idx_sigma == 0`.
    pub signs: Vec<i8>,
}

impl ResidualCode {
    pub fn trivial(d: usize) -> Self {
        Self { idx_sigma: 0, levels: vec![0; d], signs: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// `Σ (ℓᵢ + 1)`, the unary length of the levels; 0 for a trivial code.
    pub fn level_bits(&self) -> usize {
        if self.idx_sigma == 0 {
            0
        } else {
            self.levels.iter().map(|&l| l as usize + 1).sum()
        }
    }
}

/// Minimum encoded scale `τ = 1/(dB)`.
pub fn min_scale(d: usize, buckets: usize) -> f64 {
    1.0 / (d as f64 * buckets as f64)
}

/// `⌈log₂ z⌉` for finite `z ≥ 1`, read from the binary exponent.
fn ceil_log2(z: f64) -> u32 {
    debug_assert!(z >= 1.0 && z.is_finite());
    let bits = z.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let mantissa = bits & ((1u64 << 52) - 1);
    (exponent + i64::from(mantissa != 0)) as u32
}

/// Scale index: `0` when `s < τ`, else `⌈log₂(s/τ)⌉ + 1`.
pub fn scalar_quant(s: f64, d: usize, buckets: usize) -> Result<u8> {
    if s.is_nan() {
        return Err(Error::NaN);
    }
    if s < 0.0 {
        return Err(Error::NegativeScale(s));
    }
    let tau = min_scale(d, buckets);
    if s < tau {
        return Ok(0);
    }
    let mut k = ceil_log2((s / tau).max(1.0));
    // σ = τ·2^k must cover s exactly; s/τ rounds when d·B is not a power of two.
    while tau * 2f64.powi(k as i32) < s {
        k += 1;
    }
    u8::try_from(k + 1).map_err(|_| Error::Internal(format!("scale index {} exceeds 255", k + 1)))
}

/// Scale `σ` of index `idx_sigma`: `0` or `τ·2^(idx_sigma-1)`.
pub fn scalar_dequant(idx_sigma: u8, d: usize, buckets: usize) -> f64 {
    if idx_sigma == 0 {
        0.0
    } else {
        min_scale(d, buckets) * 2f64.powi(idx_sigma as i32 - 1)
    }
}

/// Smallest `ℓ ≥ 0` with `|v| ≤ σ·2^ℓ`.
fn level(abs_v: f64, sigma: f64) -> u8 {
    let z = abs_v / sigma;
    let mut l = if z <= 1.0 { 0 } else { ceil_log2(z) };
    let fits = |l: u32| abs_v <= sigma * 2f64.powi(l as i32);
    if !(fits(l) && (l == 0 || !fits(l - 1))) {
        l = 0;
        while !fits(l) {
            l += 1;
        }
    }
    l as u8
}

/// Rademacher diagonal applied to the residual of vector `vec_counter`.
pub fn residual_diagonal(seed: u64, vec_counter: u64, d: usize) -> Result<SignDiagonal> {
    SignDiagonal::from_rng(&mut stream_rng(seed, vec_counter, Stage::ResidualDiagonal), d)
}

/// Quantizes `r` under an explicit diagonal, drawing sign bits from `rng`.
pub fn residual_quant_with<R: Rng + ?Sized>(
    r: &[f64],
    buckets: usize,
    diag: &SignDiagonal,
    rng: &mut R,
) -> Result<ResidualCode> {
    let d = r.len();
    if diag.len() != d {
        return Err(Error::LengthMismatch { expected: diag.len(), actual: d });
    }
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > MAX_RESIDUAL_NORM + NORM_SLACK {
        return Err(Error::ResidualTooLarge(norm));
    }
    let idx_sigma = scalar_quant(norm / (d as f64).sqrt(), d, buckets)?;
    if idx_sigma == 0 {
        return Ok(ResidualCode::trivial(d));
    }
    let sigma = scalar_dequant(idx_sigma, d, buckets);
    let mut v = r.to_vec();
    apply_hd_in_place(&mut v, diag)?;

    let mut levels = Vec::with_capacity(d);
    let mut signs = Vec::with_capacity(d);
    for &vi in &v {
        let l = level(vi.abs(), sigma);
        let radius = sigma * 2f64.powi(l as i32);
        let p_plus = 0.5 * (1.0 + vi / radius);
        let draw: f64 = rng.random();
        levels.push(l);
        signs.push(if draw < p_plus { 1 } else { -1 });
    }
    Ok(ResidualCode { idx_sigma, levels, signs })
}

/// Quantizes the residual of vector `vec_counter`. The diagonal and the sign
/// bits come from separate streams.
pub fn residual_quant(r: &[f64], buckets: usize, seed: u64, vec_counter: u64) -> Result<ResidualCode> {
    let diag = residual_diagonal(seed, vec_counter, r.len())?;
    let mut rng = stream_rng(seed, vec_counter, Stage::ResidualSignBits);
    residual_quant_with(r, buckets, &diag, &mut rng)
}

/// The rotated-domain reconstruction `qᵢ = σ·2^ℓᵢ·λᵢ`.
pub fn rotated_values(code: &ResidualCode, buckets: usize) -> Result<Vec<f64>> {
    let d = code.levels.len();
    if code.signs.len() != d {
        return Err(Error::MalformedCode(format!("{} levels but {} signs", d, code.signs.len())));
    }
    if code.idx_sigma == 0 {
        return Ok(vec![0.0; d]);
    }
    let sigma = scalar_dequant(code.idx_sigma, d, buckets);
    code.levels
        .iter()
        .zip(&code.signs)
        .enumerate()
        .map(|(i, (&l, &s))| match s {
            1 | -1 => Ok(sigma * 2f64.powi(l as i32) * s as f64),
            _ => Err(Error::MalformedCode(format!("sign {i} is {s}"))),
        })
        .collect()
}

/// `D Hᵀ q` under an explicit diagonal.
pub fn residual_dequant_with(code: &ResidualCode, buckets: usize, diag: &SignDiagonal) -> Result<Vec<f64>> {
    let mut q = rotated_values(code, buckets)?;
    if code.idx_sigma == 0 {
        return Ok(q);
    }
    apply_hd_inverse_in_place(&mut q, diag)?;
    Ok(q)
}

/// Reconstructs `r̂` for vector `vec_counter`.
pub fn residual_dequant(code: &ResidualCode, buckets: usize, seed: u64, vec_counter: u64) -> Result<Vec<f64>> {
    let d = code.levels.len();
    if !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    if code.idx_sigma == 0 {
        return rotated_values(code, buckets);
    }
    residual_dequant_with(code, buckets, &residual_diagonal(seed, vec_counter, d)?)
}
