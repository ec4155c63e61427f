//! Two-stage codec: a base vector code, projection of its reconstruction to
//! the unit ball, and a residual code for the difference.

use crate::error::{Error, Result};
use crate::residual::{self, residual_quant_with, ResidualCode};
use crate::rng::{stream_rng, Stage};
use crate::transform::{apply_hd_in_place, SignDiagonal};
use crate::vquant::{
    base_codebook, check_code, checked_norm, decode_rotated, encode_rotated, reconstruct_direction, unit_padded,
    QuantConfig, VectorCode,
};

/// Tolerance on `‖x‖₂ = 1` for [`quantize_two_stage`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Full code of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageCode {
    pub config: QuantConfig,
    pub base: VectorCode,
    pub residual: ResidualCode,
}

impl TwoStageCode {
    pub fn seed(&self) -> u64 {
        self.base.seed
    }

    pub fn vec_counter(&self) -> u64 {
        self.base.vec_counter
    }
}

/// `v` if `‖v‖₂ ≤ 1`, else `v/‖v‖₂`.
pub fn project_unit_ball(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out);
    out
}

fn project_in_place(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

// Stage tags of the two sign diagonals; swapped only by the stream-separation test.
#[derive(Clone, Copy)]
struct Streams {
    base: Stage,
    residual: Stage,
}

const STREAMS: Streams = Streams { base: Stage::BaseSigns, residual: Stage::ResidualDiagonal };

fn diagonal(seed: u64, vec_counter: u64, d: usize, stage: Stage) -> Result<SignDiagonal> {
    SignDiagonal::from_rng(&mut stream_rng(seed, vec_counter, stage), d)
}

/// Encodes a unit vector `x` (length `d_orig`) as vector number `vec_counter`.
pub fn quantize_two_stage(x: &[f64], cfg: &QuantConfig, seed: u64, vec_counter: u64) -> Result<TwoStageCode> {
    let norm = checked_norm(x)?;
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit(norm));
    }
    encode(x, cfg, seed, vec_counter, STREAMS)
}

/// Encodes an arbitrary finite `x`: the direction goes through both stages
/// and the norm is stored in the base code. The zero vector gets a zero code.
pub fn quantize_two_stage_scaled(x: &[f64], cfg: &QuantConfig, seed: u64, vec_counter: u64) -> Result<TwoStageCode> {
    encode(x, cfg, seed, vec_counter, STREAMS)
}

fn encode(x: &[f64], cfg: &QuantConfig, seed: u64, vec_counter: u64, streams: Streams) -> Result<TwoStageCode> {
    if x.len() != cfg.d_orig() {
        return Err(Error::LengthMismatch { expected: cfg.d_orig(), actual: x.len() });
    }
    let d = cfg.dim();
    let norm = checked_norm(x)?;
    if norm == 0.0 {
        return Ok(TwoStageCode {
            config: *cfg,
            base: VectorCode { idx: vec![0; d], norm, seed, vec_counter },
            residual: ResidualCode::trivial(d),
        });
    }
    let unit = unit_padded(x, norm, d);
    let base_diag = diagonal(seed, vec_counter, d, streams.base)?;
    let cb = base_codebook(cfg, seed, vec_counter)?;
    let idx = encode_rotated(&unit, &base_diag, &cb)?;

    let mut r = decode_rotated(&idx, &base_diag, &cb)?;
    project_in_place(&mut r);
    r.iter_mut().zip(&unit).for_each(|(ri, xi)| *ri = xi - *ri);

    let res_diag = diagonal(seed, vec_counter, d, streams.residual)?;
    let mut sign_rng = stream_rng(seed, vec_counter, Stage::ResidualSignBits);
    let residual = residual_quant_with(&r, cfg.buckets(), &res_diag, &mut sign_rng)?;
    Ok(TwoStageCode { config: *cfg, base: VectorCode { idx, norm, seed, vec_counter }, residual })
}

fn check_residual(code: &TwoStageCode) -> Result<()> {
    let d = code.config.dim();
    if code.residual.levels.len() != d || code.residual.signs.len() != d {
        return Err(Error::MalformedCode(format!(
            "residual has {} levels and {} signs for dimension {d}",
            code.residual.levels.len(),
            code.residual.signs.len()
        )));
    }
    Ok(())
}

/// Reconstructs `x̂ = ‖x‖·(Π(x̃) + r̂)`, truncated to `d_orig`.
pub fn dequantize_two_stage(code: &TwoStageCode) -> Result<Vec<f64>> {
    let cfg = &code.config;
    check_residual(code)?;
    let Some(mut dir) = reconstruct_direction(&code.base, cfg)? else {
        return Ok(vec![0.0; cfg.d_orig()]);
    };
    project_in_place(&mut dir);
    let rhat = residual::residual_dequant(&code.residual, cfg.buckets(), code.seed(), code.vec_counter())?;
    Ok(dir[..cfg.d_orig()].iter().zip(&rhat).map(|(a, b)| code.base.norm * (a + b)).collect())
}

/// `⟨y, x̂⟩` evaluated in the rotated domains without forming `x̂`.
pub fn estimate_inner_product(code: &TwoStageCode, y: &[f64]) -> Result<f64> {
    let cfg = &code.config;
    if y.len() != cfg.d_orig() {
        return Err(Error::LengthMismatch { expected: cfg.d_orig(), actual: y.len() });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    check_code(&code.base, cfg)?;
    check_residual(code)?;
    if code.base.norm == 0.0 {
        return Ok(0.0);
    }
    let d = cfg.dim();
    let (seed, counter) = (code.seed(), code.vec_counter());
    let mut y_pad = y.to_vec();
    y_pad.resize(d, 0.0);

    let cb = base_codebook(cfg, seed, counter)?;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let ytilde = code
        .base
        .idx
        .iter()
        .map(|&j| cb.reconstruct(j as usize).map(|q| q * inv_sqrt_d))
        .collect::<Result<Vec<_>>>()?;
    let ytilde_norm = ytilde.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if ytilde_norm > 1.0 { 1.0 / ytilde_norm } else { 1.0 };
    let mut rotated = y_pad.clone();
    apply_hd_in_place(&mut rotated, &diagonal(seed, counter, d, STREAMS.base)?)?;
    let base_term: f64 = rotated.iter().zip(&ytilde).map(|(a, b)| a * b).sum::<f64>() * scale;

    let residual_term = if code.residual.idx_sigma == 0 {
        0.0
    } else {
        let q = residual::rotated_values(&code.residual, cfg.buckets())?;
        let mut rotated = y_pad;
        apply_hd_in_place(&mut rotated, &diagonal(seed, counter, d, STREAMS.residual)?)?;
        rotated.iter().zip(&q).map(|(a, b)| a * b).sum()
    };
    Ok(code.base.norm * (base_term + residual_term))
}
