//! Whole-vector dithered quantization.
//!
//! A vector is split into its norm (kept at full precision) and its
//! direction. The direction is zero-padded to a power of two, rotated by
//! `HD`, scaled by `√d` and every coordinate is quantized with the same
//! dithered scalar codebook. The sign diagonal `D` and the dither `U` are
//! derived from `(seed, vec_counter)`, so the decoder needs nothing else.

use crate::codebook::{build_codebook, Mode, ScalarCodebook};
use crate::error::{Error, Result};
use crate::rng::{open_unit, stream_rng, Stage};
use crate::transform::{apply_hd_in_place, apply_hd_inverse_in_place, sample_signs, SignDiagonal};

/// Largest supported bits per coordinate.
pub const MAX_BITS: u32 = 16;

/// Dimensions, bit width and reconstruction mode of a quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantConfig {
    d_orig: usize,
    d: usize,
    bits: u32,
    mode: Mode,
}

impl QuantConfig {
    pub fn new(d_orig: usize, bits: u32, mode: Mode) -> Result<Self> {
        if d_orig == 0 {
            return Err(Error::EmptyInput);
        }
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(Error::InvalidBitWidth(bits));
        }
        Ok(Self { d_orig, d: d_orig.next_power_of_two(), bits, mode })
    }

    /// Dimension of the input vectors.
    pub fn d_orig(&self) -> usize {
        self.d_orig
    }

    /// Padded (power-of-two) dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `B = 2^b`.
    pub fn buckets(&self) -> usize {
        1 << self.bits
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// Base-stage code of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorCode {
    /// Bucket index per padded coordinate.
    pub idx: Vec<u16>,
    /// `‖x‖₂` of the original input.
    pub norm: f64,
    pub seed: u64,
    pub vec_counter: u64,
}

/// Dither offset `U ∈ (0, 1)` of vector `vec_counter`.
pub fn dither_offset(seed: u64, vec_counter: u64) -> f64 {
    open_unit(&mut stream_rng(seed, vec_counter, Stage::Dither))
}

/// Sign diagonal `D` of vector `vec_counter`.
pub fn base_signs(cfg: &QuantConfig, seed: u64, vec_counter: u64) -> SignDiagonal {
    sample_signs(seed, vec_counter, cfg.d).expect("padded dimension is a power of two")
}

/// Scalar codebook of vector `vec_counter`.
pub fn base_codebook(cfg: &QuantConfig, seed: u64, vec_counter: u64) -> Result<ScalarCodebook> {
    build_codebook(cfg.mode, cfg.buckets(), dither_offset(seed, vec_counter))
}

/// `‖x‖₂`, scaled against overflow. Rejects non-finite coordinates.
pub(crate) fn checked_norm(x: &[f64]) -> Result<f64> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = x.iter().map(|v| (v / max) * (v / max)).sum();
    Ok(max * sum.sqrt())
}

/// Quantizes an already padded, unit-scale vector under an explicit `(D, codebook)`.
pub fn encode_rotated(unit: &[f64], diag: &SignDiagonal, cb: &ScalarCodebook) -> Result<Vec<u16>> {
    let mut y = unit.to_vec();
    apply_hd_in_place(&mut y, diag)?;
    let scale = (y.len() as f64).sqrt();
    y.iter().map(|&yi| cb.quantize(scale * yi).map(|j| j as u16)).collect()
}

/// `D Hᵀ ỹ` with `ỹᵢ = q_{idxᵢ} / √d`, in padded space and at unit scale.
pub fn decode_rotated(idx: &[u16], diag: &SignDiagonal, cb: &ScalarCodebook) -> Result<Vec<f64>> {
    let inv_scale = 1.0 / (idx.len() as f64).sqrt();
    let mut y = idx.iter().map(|&j| cb.reconstruct(j as usize).map(|q| q * inv_scale)).collect::<Result<Vec<_>>>()?;
    apply_hd_inverse_in_place(&mut y, diag)?;
    Ok(y)
}

/// Pads `x / norm` with zeros to length `d`.
pub(crate) fn unit_padded(x: &[f64], norm: f64, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    if norm > 0.0 {
        for (dst, src) in v.iter_mut().zip(x) {
            *dst = src / norm;
        }
    }
    v
}

/// Quantizes `x` (length `d_orig`) as vector number `vec_counter`.
pub fn vector_quant(x: &[f64], cfg: &QuantConfig, seed: u64, vec_counter: u64) -> Result<VectorCode> {
    if x.len() != cfg.d_orig {
        return Err(Error::LengthMismatch { expected: cfg.d_orig, actual: x.len() });
    }
    let norm = checked_norm(x)?;
    if norm == 0.0 {
        return Ok(VectorCode { idx: vec![0; cfg.d], norm, seed, vec_counter });
    }
    let diag = base_signs(cfg, seed, vec_counter);
    let cb = base_codebook(cfg, seed, vec_counter)?;
    let idx = encode_rotated(&unit_padded(x, norm, cfg.d), &diag, &cb)?;
    Ok(VectorCode { idx, norm, seed, vec_counter })
}

pub(crate) fn check_code(code: &VectorCode, cfg: &QuantConfig) -> Result<()> {
    if code.idx.len() != cfg.d {
        return Err(Error::LengthMismatch { expected: cfg.d, actual: code.idx.len() });
    }
    if let Some(&j) = code.idx.iter().find(|&&j| j as usize >= cfg.buckets()) {
        return Err(Error::IndexOutOfRange { index: j as usize, buckets: cfg.buckets() });
    }
    if !code.norm.is_finite() || code.norm < 0.0 {
        return Err(Error::MalformedCode(format!("norm {} is not a finite non-negative value", code.norm)));
    }
    Ok(())
}

/// Unit-scale reconstruction in padded space, before the norm is applied.
/// `None` for the zero vector.
pub fn reconstruct_direction(code: &VectorCode, cfg: &QuantConfig) -> Result<Option<Vec<f64>>> {
    check_code(code, cfg)?;
    if code.norm == 0.0 {
        return Ok(None);
    }
    let diag = base_signs(cfg, code.seed, code.vec_counter);
    let cb = base_codebook(cfg, code.seed, code.vec_counter)?;
    decode_rotated(&code.idx, &diag, &cb).map(Some)
}

/// Reconstructs `x̃` (length `d_orig`).
pub fn vector_dequant(code: &VectorCode, cfg: &QuantConfig) -> Result<Vec<f64>> {
    Ok(match reconstruct_direction(code, cfg)? {
        None => vec![0.0; cfg.d_orig],
        Some(dir) => dir[..cfg.d_orig].iter().map(|v| v * code.norm).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{integrate, unbiased_u_breaks};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = checked_norm(&v).unwrap();
        v.into_iter().map(|x| x / n).collect()
    }

    fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    #[test]
    fn config_validation() {
        let cfg = QuantConfig::new(100, 4, Mode::Unbiased).unwrap();
        assert_eq!((cfg.d_orig(), cfg.dim(), cfg.buckets()), (100, 128, 16));
        assert_eq!(QuantConfig::new(0, 4, Mode::Biased), Err(Error::EmptyInput));
        assert_eq!(QuantConfig::new(8, 0, Mode::Biased), Err(Error::InvalidBitWidth(0)));
        assert_eq!(QuantConfig::new(8, 17, Mode::Biased), Err(Error::InvalidBitWidth(17)));
        assert_eq!(QuantConfig::new(8, 16, Mode::Biased).unwrap().dim(), 8);
    }

    #[test]
    fn zero_vector() {
        let cfg = QuantConfig::new(5, 3, Mode::Unbiased).unwrap();
        let code = vector_quant(&[0.0; 5], &cfg, 1, 2).unwrap();
        assert_eq!(code.norm, 0.0);
        assert_eq!(code.idx, vec![0; 8]);
        assert_eq!(vector_dequant(&code, &cfg).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = QuantConfig::new(3, 3, Mode::Unbiased).unwrap();
        assert_eq!(vector_quant(&[1.0, f64::NAN, 0.0], &cfg, 0, 0), Err(Error::NonFinite(1)));
        assert_eq!(vector_quant(&[1.0, 0.0, f64::INFINITY], &cfg, 0, 0), Err(Error::NonFinite(2)));
        assert!(matches!(vector_quant(&[1.0], &cfg, 0, 0), Err(Error::LengthMismatch { .. })));
        let mut code = vector_quant(&[1.0, 2.0, 3.0], &cfg, 0, 0).unwrap();
        code.idx[0] = 8;
        assert_eq!(vector_dequant(&code, &cfg), Err(Error::IndexOutOfRange { index: 8, buckets: 8 }));
    }

    // With a single bit the bucket holding t = ±1 can have a centroid of the
    // opposite sign, so the guarantee starts at two bits.
    #[test]
    fn one_dimensional_keeps_sign() {
        for mode in [Mode::Biased, Mode::Unbiased] {
            for bits in 2..=8 {
                let cfg = QuantConfig::new(1, bits, mode).unwrap();
                for counter in 0..50 {
                    for &x in &[2.5, -0.75] {
                        let code = vector_quant(&[x], &cfg, 9, counter).unwrap();
                        let back = vector_dequant(&code, &cfg).unwrap();
                        assert_eq!(back[0].signum(), f64::signum(x), "mode {mode:?} b={bits}");
                    }
                }
            }
        }
    }

    #[test]
    fn one_bit_one_dimensional_can_flip() {
        let cfg = QuantConfig::new(1, 1, Mode::Biased).unwrap();
        let flips = (0..200)
            .filter(|&c| vector_dequant(&vector_quant(&[1.0], &cfg, 0, c).unwrap(), &cfg).unwrap()[0] < 0.0)
            .count();
        assert!(flips > 0 && flips < 200);
    }

    #[test]
    fn eight_bit_distortion_is_small() {
        let cfg = QuantConfig::new(16, 8, Mode::Unbiased).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for counter in 0..100 {
            let x = unit(&mut rng, 16);
            let code = vector_quant(&x, &cfg, 77, counter).unwrap();
            let back = vector_dequant(&code, &cfg).unwrap();
            assert!(sq_dist(&x, &back) < 0.01);
        }
    }

    #[test]
    fn decode_is_deterministic() {
        let cfg = QuantConfig::new(37, 5, Mode::Unbiased).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = unit(&mut rng, 37);
        let code = vector_quant(&x, &cfg, 3, 4).unwrap();
        let a = vector_dequant(&code, &cfg).unwrap();
        let b = vector_dequant(&code, &cfg).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert_eq!(code, vector_quant(&x, &cfg, 3, 4).unwrap());
    }

    // ‖x - x̃‖² = (1/d)·Σ (zᵢ - quant(zᵢ))² for every single draw.
    #[test]
    fn error_decomposes_in_rotated_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [Mode::Biased, Mode::Unbiased] {
            let cfg = QuantConfig::new(64, 3, mode).unwrap();
            for counter in 0..50 {
                let x = unit(&mut rng, 64);
                let code = vector_quant(&x, &cfg, 5, counter).unwrap();
                let back = vector_dequant(&code, &cfg).unwrap();
                let diag = base_signs(&cfg, 5, counter);
                let cb = base_codebook(&cfg, 5, counter).unwrap();
                let mut z = x.clone();
                apply_hd_in_place(&mut z, &diag).unwrap();
                let rotated: f64 = z
                    .iter()
                    .map(|zi| {
                        let t = 8.0 * zi;
                        (t - cb.quant(t).unwrap()).powi(2)
                    })
                    .sum::<f64>()
                    / 64.0;
                let direct = sq_dist(&x, &back);
                assert!((direct - rotated).abs() <= 1e-9 * direct, "{direct} vs {rotated}");
            }
        }
    }

    #[test]
    fn padding_is_transparent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = unit(&mut rng, 13);
        let cfg = QuantConfig::new(13, 4, Mode::Unbiased).unwrap();
        let code = vector_quant(&x, &cfg, 1, 1).unwrap();
        assert_eq!(code.idx.len(), 16);
        let back = vector_dequant(&code, &cfg).unwrap();
        assert_eq!(back.len(), 13);

        // the same vector explicitly zero-padded to 16 produces the same code
        let mut padded = x.clone();
        padded.resize(16, 0.0);
        let cfg16 = QuantConfig::new(16, 4, Mode::Unbiased).unwrap();
        let code16 = vector_quant(&padded, &cfg16, 1, 1).unwrap();
        assert_eq!(code16.idx, code.idx);
        let back16 = vector_dequant(&code16, &cfg16).unwrap();
        assert_eq!(&back16[..13], &back[..]);
    }

    // Averaging x̃ over U at fixed D recovers x exactly.
    #[test]
    fn unbiased_over_dither_at_fixed_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = unit(&mut rng, 8);
        let cfg = QuantConfig::new(8, 4, Mode::Unbiased).unwrap();
        let diag = base_signs(&cfg, 11, 0);
        let mut z = x.clone();
        apply_hd_in_place(&mut z, &diag).unwrap();
        let scale = 8f64.sqrt();
        let breaks: Vec<f64> = z.iter().flat_map(|zi| unbiased_u_breaks(scale * zi, 16)).collect();
        for i in 0..8 {
            let mean = integrate(
                |u| {
                    let cb = build_codebook(Mode::Unbiased, 16, u).unwrap();
                    let idx = encode_rotated(&x, &diag, &cb).unwrap();
                    decode_rotated(&idx, &diag, &cb).unwrap()[i]
                },
                0.0,
                1.0,
                &breaks,
                1e-10,
            )
            .unwrap();
            assert!((mean - x[i]).abs() <= 1e-6, "coord {i}: {mean} vs {}", x[i]);
        }
    }
}
