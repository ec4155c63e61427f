//! Gaussian-quantile scalar codebooks.
//!
//! Coordinates are mapped through the CDF of `N(0, 3)`, a dithered uniform
//! grid is laid over the resulting quantile level, and each bucket is
//! reconstructed either at the quantile of its grid midpoint (biased mode) or
//! through the unbiased reconstruction map [`unbiased_map`] whose cell
//! averages equal the quantile function.

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_6: f64 = 2.449_489_742_783_178;
/// `1 / sqrt(6π)`, the density of `N(0, 3)` at zero.
const INV_SQRT_6PI: f64 = 0.230_329_432_980_890_9;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Reconstruction rule of a scalar codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// Grid spacing `1/B` with pinned endpoints; middle-quantile centroids.
    Biased,
    /// Grid spacing `1/(B-1)`; centroids from the unbiased map.
    #[default]
    Unbiased,
}

impl Mode {
    pub fn as_byte(self) -> u8 {
        match self {
            Mode::Biased => 0,
            Mode::Unbiased => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Mode::Biased),
            1 => Some(Mode::Unbiased),
            _ => None,
        }
    }
}

/// CDF of `N(0, 3)`.
pub fn cdf(t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(Error::NaN);
    }
    Ok(0.5 * libm::erfc(-t / SQRT_6))
}

/// Density of `N(0, 3)`: `exp(-t²/6) / sqrt(6π)`.
pub fn density(t: f64) -> f64 {
    INV_SQRT_6PI * (-t * t / 6.0).exp()
}

/// Quantile function of `N(0, 3)`, i.e. `sqrt(3)·Φ⁻¹(p)`.
pub fn quantile(p: f64) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::NaN);
    }
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(SQRT_3 * std_normal_quantile(p))
}

/// Quantile extended to the closed interval by its limits `±∞`.
fn quantile_or_inf(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        SQRT_3 * std_normal_quantile(p)
    }
}

/// Derivative of the quantile function, `1 / density(quantile(s))`; `+∞` outside (0, 1).
pub fn quantile_derivative(s: f64) -> f64 {
    if s > 0.0 && s < 1.0 {
        1.0 / density(SQRT_3 * std_normal_quantile(s))
    } else {
        f64::INFINITY
    }
}

// Acklam's rational approximation followed by one Halley step against erfc.
fn std_normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1).
        return -std_normal_quantile(1.0 - p);
    }
    #[allow(clippy::excessive_precision)]
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    if u.is_finite() {
        x - u / (1.0 + 0.5 * x * u)
    } else {
        x
    }
}

/// The unbiased reconstruction map for `B` buckets, evaluated by its explicit
/// piecewise formula.
///
/// With `δ = 1/(B-1)`, write `r = u + kδ` where `u ∈ ((1-δ)/2, (1+δ)/2]`.
/// Then `G(r) = quantile(u) + δ·Σ quantile'(u + (j+½)δ)` over
/// `j = 0..k` for `k > 0`, and minus the same sum over `j = k..0` for
/// `k < 0`. Its average over any cell of width `δ` centred in (0, 1) equals
/// [`quantile`] at the centre. The closed endpoints `-δ/2` and `1+δ/2` take
/// the one-sided limits `-∞` and `+∞`.
pub fn unbiased_map(r: f64, buckets: usize) -> Result<f64> {
    if r.is_nan() {
        return Err(Error::NaN);
    }
    if buckets < 2 {
        return Err(Error::InvalidBucketCount(buckets));
    }
    let delta = 1.0 / (buckets - 1) as f64;
    let (lo, hi) = (-0.5 * delta, 1.0 + 0.5 * delta);
    if !(lo..=hi).contains(&r) {
        return Err(Error::OutOfDomain { arg: r, lo, hi });
    }
    let cell_lo = 0.5 * (1.0 - delta);
    let cell_hi = 0.5 * (1.0 + delta);
    let mut k = ((r - cell_hi) / delta).ceil() as i64;
    let mut u = r - k as f64 * delta;
    while u > cell_hi {
        k += 1;
        u = r - k as f64 * delta;
    }
    while u <= cell_lo {
        k -= 1;
        u = r - k as f64 * delta;
    }
    let mut value = quantile_or_inf(u);
    if k > 0 {
        for j in 0..k {
            value += delta * quantile_derivative(u + (j as f64 + 0.5) * delta);
        }
    } else {
        for j in k..0 {
            value -= delta * quantile_derivative(u + (j as f64 + 0.5) * delta);
        }
    }
    Ok(value)
}

/// Scalar codebook for one `(mode, B, U)`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCodebook {
    mode: Mode,
    buckets: usize,
    offset: f64,
    recon: Vec<f64>,
    /// Quantile-level grid `h_0..=h_B`; biased mode only.
    grid: Vec<f64>,
}

/// Builds the codebook for `buckets = 2^b` buckets and dither offset `offset`.
///
/// Unbiased centroids come from a single outward sweep from the central
/// cell, `O(B)` quantile evaluations in total. With `offset = 0` the lowest
/// unbiased centroid is `-∞`; its bucket is empty for every finite input.
pub fn build_codebook(mode: Mode, buckets: usize, offset: f64) -> Result<ScalarCodebook> {
    if buckets < 2 || !buckets.is_power_of_two() {
        return Err(Error::InvalidBucketCount(buckets));
    }
    if !(0.0..1.0).contains(&offset) {
        return Err(Error::InvalidOffset(offset));
    }
    let cb = match mode {
        Mode::Biased => biased(buckets, offset)?,
        Mode::Unbiased => unbiased(buckets, offset)?,
    };
    Ok(cb)
}

fn biased(buckets: usize, offset: f64) -> Result<ScalarCodebook> {
    let bf = buckets as f64;
    let mut grid = Vec::with_capacity(buckets + 1);
    grid.push(0.0);
    grid.extend((1..buckets).map(|j| (j as f64 + offset) / bf));
    grid.push(1.0);
    let recon = grid.windows(2).map(|w| quantile(0.5 * (w[0] + w[1]))).collect::<Result<Vec<_>>>()?;
    Ok(ScalarCodebook { mode: Mode::Biased, buckets, offset, recon, grid })
}

fn unbiased(buckets: usize, offset: f64) -> Result<ScalarCodebook> {
    let delta = 1.0 / (buckets - 1) as f64;
    // Index whose grid midpoint (j + U - 1/2)·δ lies in the central cell.
    let center = if offset <= 0.5 { buckets / 2 } else { buckets / 2 - 1 };
    let u = (center as f64 + offset - 0.5) * delta;
    debug_assert!(u > 0.5 * (1.0 - delta) - 1e-12 && u <= 0.5 * (1.0 + delta) + 1e-12);

    let mut recon = vec![0.0; buckets];
    recon[center] = quantile_or_inf(u);
    for j in center + 1..buckets {
        let step = (j - center) as f64 - 0.5;
        recon[j] = recon[j - 1] + delta * quantile_derivative(u + step * delta);
    }
    for j in (0..center).rev() {
        let step = -((center - j) as f64) + 0.5;
        recon[j] = recon[j + 1] - delta * quantile_derivative(u + step * delta);
    }
    // Bucket 0 is empty when U = 0, so its -∞ centroid is unreachable.
    let first_reachable = usize::from(offset == 0.0);
    if recon[first_reachable..].iter().any(|q| !q.is_finite()) {
        return Err(Error::DegenerateCodebook { buckets, offset });
    }
    Ok(ScalarCodebook { mode: Mode::Unbiased, buckets, offset, recon, grid: Vec::new() })
}

impl ScalarCodebook {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Reconstruction values `q_0 < q_1 < … < q_{B-1}`.
    pub fn recon(&self) -> &[f64] {
        &self.recon
    }

    /// Quantile grid `h_0..=h_B` (empty in unbiased mode).
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Bucket index of `t`.
    ///
    /// Biased buckets are half-open, `h_j ≤ F(t) < h_{j+1}`. Unbiased
    /// buckets use `⌊(B-1)F(t) - U⌋ + 1`, clamped against floating-point
    /// saturation of `F` in the far tails.
    pub fn quantize(&self, t: f64) -> Result<usize> {
        let p = cdf(t)?;
        let last = self.buckets - 1;
        let j = match self.mode {
            Mode::Biased => {
                let guess = (self.buckets as f64 * p - self.offset).floor();
                let mut j = guess.clamp(0.0, last as f64) as usize;
                while j < last && p >= self.grid[j + 1] {
                    j += 1;
                }
                while j > 0 && p < self.grid[j] {
                    j -= 1;
                }
                j
            }
            Mode::Unbiased => {
                let raw = (last as f64 * p - self.offset).floor() + 1.0;
                raw.clamp(0.0, last as f64) as usize
            }
        };
        Ok(j)
    }

    /// Reconstruction value of bucket `j`.
    pub fn reconstruct(&self, j: usize) -> Result<f64> {
        self.recon.get(j).copied().ok_or(Error::IndexOutOfRange { index: j, buckets: self.buckets })
    }

    /// `reconstruct(quantize(t))`.
    pub fn quant(&self, t: f64) -> Result<f64> {
        Ok(self.recon[self.quantize(t)?])
    }
}
