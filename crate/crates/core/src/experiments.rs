//! Seeded Monte Carlo and oracle experiments that measure the quantizer's
//! constants against their theoretical values.
//!
//! Trial `t` of every experiment draws its codec randomness from
//! `(seed, t)` and its inputs from [`auxiliary_rng`], so results do not
//! depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bitstream::{encode, rate_report};
use crate::codebook::{build_codebook, quantile, unbiased_map, Mode};
use crate::error::{Error, Result};
use crate::oracle::{self, integrate, map_jump_points, unbiased_u_breaks};
use crate::rng::auxiliary_rng;
use crate::transform::{apply_hd, fwht_normalized, sample_signs};
use crate::twostage::{estimate_inner_product, quantize_two_stage};
use crate::vquant::{vector_dequant, vector_quant, QuantConfig};

/// `π√3/2`, the leading MSE constant per unit vector at `4^-b`.
pub const MSE_CONSTANT: f64 = 2.720_699_046_351_326_6;
/// `13·(π√3/2 + 1)`, the leading inner-product error constant.
pub const INNER_PRODUCT_CONSTANT: f64 = 13.0 * (MSE_CONSTANT + 1.0);
/// `3 + 1/(2 ln 2)`, residual bits per coordinate beyond the `b` index bits.
pub const RESIDUAL_BITS_PER_COORD: f64 = 3.721_347_520_444_482;

pub const MSE_WINDOW: (f64, f64) = (2.3, 3.0);
pub const MAX_Z_SCORE: f64 = 5.0;
pub const QUADRATURE_TOL: f64 = 1e-6;
pub const INNER_PRODUCT_LIMIT: f64 = 48.4;
pub const ENUMERATION_TOL: f64 = 1e-12;
pub const MAP_AVERAGE_TOL: f64 = 1e-7;
pub const FWHT_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-10;

/// Pass rule of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Within(f64, f64),
    AtMost(f64),
    /// Informational; always passes.
    Report,
}

impl Criterion {
    pub fn check(&self, measured: f64) -> bool {
        match *self {
            Criterion::Within(lo, hi) => (lo..=hi).contains(&measured),
            Criterion::AtMost(hi) => measured <= hi,
            Criterion::Report => true,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
            Criterion::AtMost(hi) => write!(f, "<= {hi:e}"),
            Criterion::Report => write!(f, "report"),
        }
    }
}

/// One measured quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub name: String,
    pub d: usize,
    pub b: u32,
    pub trials: u64,
    pub measured: f64,
    /// Theoretical value the measurement is compared with.
    pub reference: f64,
    pub criterion: Criterion,
    pub pass: bool,
    pub wall_time: Duration,
}

impl ExperimentRow {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: impl Into<String>,
        d: usize,
        b: u32,
        trials: u64,
        measured: f64,
        reference: f64,
        criterion: Criterion,
        start: Instant,
    ) -> Self {
        Self {
            name: name.into(),
            d,
            b,
            trials,
            measured,
            reference,
            criterion,
            pass: criterion.check(measured),
            wall_time: start.elapsed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Mse,
    Unbiased,
    InnerProduct,
    Rate,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Mse, Suite::Unbiased, Suite::InnerProduct, Suite::Rate, Suite::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Mse => "mse",
            Suite::Unbiased => "unbiased",
            Suite::InnerProduct => "inner-product",
            Suite::Rate => "rate",
            Suite::Oracle => "oracle",
        }
    }

    /// Dimension, bit width and trial count used when none are given.
    pub fn defaults(self) -> (usize, u32, u64) {
        match self {
            Suite::Mse => (1024, 6, 20_000),
            Suite::Unbiased => (64, 3, 100_000),
            Suite::InnerProduct => (512, 4, 10_000),
            Suite::Rate => (4096, 4, 1000),
            Suite::Oracle => (12, 3, 20),
        }
    }

    pub fn run(self, p: &Params) -> Result<Vec<ExperimentRow>> {
        match self {
            Suite::Mse => mse_suite(p),
            Suite::Unbiased => unbiased_suite(p),
            Suite::InnerProduct => inner_product_suite(p),
            Suite::Rate => rate_suite(p),
            Suite::Oracle => oracle_suite(p),
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`; expected one of mse, unbiased, inner-product, rate, oracle"))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub dim: usize,
    pub bits: u32,
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
}

impl Params {
    pub fn for_suite(suite: Suite, seed: u64) -> Self {
        let (dim, bits, trials) = suite.defaults();
        Self { dim, bits, trials, seed, mode: Mode::Unbiased }
    }
}

/// Gaussian vector normalized to the unit sphere, drawn from `auxiliary_rng(seed, counter)`.
pub fn random_unit(seed: u64, counter: u64, d: usize) -> Vec<f64> {
    let mut rng = auxiliary_rng(seed, counter);
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn basis_vector(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn par_trials<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..trials).into_par_iter().map(&f).collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

fn estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate { mean, std_error: (var / n).sqrt() }
}

/// `4^b·‖x - x̃‖²` over fresh `(D, U)` for trials `0..trials`.
pub fn mse_statistic(x: &[f64], cfg: &QuantConfig, trials: u64, seed: u64) -> Result<Estimate> {
    let scale = 4f64.powi(cfg.bits() as i32);
    let errs = par_trials(trials, |t| {
        let code = vector_quant(x, cfg, seed, t)?;
        let back = vector_dequant(&code, cfg)?;
        Ok(scale * x.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    })?;
    Ok(estimate(&errs))
}

pub fn mse_suite(p: &Params) -> Result<Vec<ExperimentRow>> {
    let cfg = QuantConfig::new(p.dim, p.bits, p.mode)?;
    let inputs = [("mse/random-unit", random_unit(p.seed, u64::MAX, p.dim)), ("mse/e1", basis_vector(p.dim))];
    inputs
        .into_iter()
        .map(|(name, x)| {
            let start = Instant::now();
            let est = mse_statistic(&x, &cfg, p.trials, p.seed)?;
            let (lo, hi) = MSE_WINDOW;
            Ok(ExperimentRow::new(
                name,
                p.dim,
                p.bits,
                p.trials,
                est.mean,
                MSE_CONSTANT,
                Criterion::Within(lo, hi),
                start,
            ))
        })
        .collect()
}

/// `4^b`-scaled MSE at each bit width, for a fixed random unit vector.
pub fn mse_trend(
    dim: usize,
    bits: std::ops::RangeInclusive<u32>,
    trials: u64,
    seed: u64,
    mode: Mode,
) -> Result<Vec<ExperimentRow>> {
    let x = random_unit(seed, u64::MAX, dim);
    bits.map(|b| {
        let start = Instant::now();
        let cfg = QuantConfig::new(dim, b, mode)?;
        let est = mse_statistic(&x, &cfg, trials, seed)?;
        Ok(ExperimentRow::new(
            format!("mse-trend/b={b}"),
            dim,
            b,
            trials,
            est.mean,
            MSE_CONSTANT,
            Criterion::Report,
            start,
        ))
    })
    .collect()
}

const CHUNK: u64 = 512;

/// Largest `|mean(x̃ᵢ) - xᵢ| / SEᵢ` over coordinates.
pub fn max_bias_z_score(x: &[f64], cfg: &QuantConfig, trials: u64, seed: u64) -> Result<f64> {
    let d = x.len();
    let partial = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; d];
            let mut sumsq = vec![0.0; d];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let back = vector_dequant(&vector_quant(x, cfg, seed, t)?, cfg)?;
                for i in 0..d {
                    let e = back[i] - x[i];
                    sum[i] += e;
                    sumsq[i] += e * e;
                }
            }
            Ok((sum, sumsq))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    for (s, q) in partial {
        for i in 0..d {
            sum[i] += s[i];
            sumsq[i] += q[i];
        }
    }
    let n = trials as f64;
    Ok((0..d)
        .map(|i| {
            let mean = sum[i] / n;
            let var = (sumsq[i] / n - mean * mean) * n / (n - 1.0);
            mean.abs() / (var / n).sqrt()
        })
        .fold(0.0, f64::max))
}

/// Largest `|E_U quant(t) - t|` over `t ∈ [-6, 6]` in steps of 1/4, by quadrature over `U`.
pub fn scalar_bias_by_quadrature(buckets: usize, mode: Mode) -> Result<f64> {
    (-24..=24)
        .map(|k| {
            let t = k as f64 * 0.25;
            let breaks = match mode {
                Mode::Unbiased => unbiased_u_breaks(t, buckets),
                Mode::Biased => oracle::biased_u_breaks(t, buckets),
            };
            let mut failure = None;
            let mean = integrate(
                |u| match build_codebook(mode, buckets, u).and_then(|cb| cb.quant(t)) {
                    Ok(q) => q,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                },
                0.0,
                1.0,
                &breaks,
                1e-10,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok((mean - t).abs()),
            }
        })
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))
}

pub fn unbiased_suite(p: &Params) -> Result<Vec<ExperimentRow>> {
    let cfg = QuantConfig::new(p.dim, p.bits, p.mode)?;
    let x = random_unit(p.seed, u64::MAX, p.dim);
    let start = Instant::now();
    let z = max_bias_z_score(&x, &cfg, p.trials, p.seed)?;
    let mc = ExperimentRow::new(
        "unbiased/max-z-score",
        p.dim,
        p.bits,
        p.trials,
        z,
        0.0,
        Criterion::AtMost(MAX_Z_SCORE),
        start,
    );
    let start = Instant::now();
    let bias = scalar_bias_by_quadrature(cfg.buckets(), p.mode)?;
    let quad = ExperimentRow::new(
        "unbiased/scalar-quadrature",
        1,
        p.bits,
        0,
        bias,
        0.0,
        Criterion::AtMost(QUADRATURE_TOL),
        start,
    );
    Ok(vec![mc, quad])
}

/// `d·4^b·mean(⟨y, x̂ - x⟩²/‖y‖²)` for a fixed unit `x` and a fresh random unit `y` per trial.
pub fn inner_product_statistic(x: &[f64], cfg: &QuantConfig, trials: u64, seed: u64) -> Result<Estimate> {
    let scale = cfg.d_orig() as f64 * 4f64.powi(cfg.bits() as i32);
    let errs = par_trials(trials, |t| {
        let y = random_unit(seed, t, x.len());
        let code = quantize_two_stage(x, cfg, seed, t)?;
        let err = estimate_inner_product(&code, &y)? - dot(&y, x);
        Ok(scale * err * err / dot(&y, &y))
    })?;
    Ok(estimate(&errs))
}

pub fn inner_product_suite(p: &Params) -> Result<Vec<ExperimentRow>> {
    let cfg = QuantConfig::new(p.dim, p.bits, p.mode)?;
    let x = random_unit(p.seed, u64::MAX, p.dim);
    let start = Instant::now();
    let est = inner_product_statistic(&x, &cfg, p.trials, p.seed)?;
    Ok(vec![ExperimentRow::new(
        "inner-product/scaled-mse",
        p.dim,
        p.bits,
        p.trials,
        est.mean,
        INNER_PRODUCT_CONSTANT,
        Criterion::AtMost(INNER_PRODUCT_LIMIT),
        start,
    )])
}

/// Non-header bit budget `d·b + ⌈(3 + 1/(2 ln 2))·d⌉`.
pub fn body_bit_budget(d: usize, bits: u32) -> usize {
    d * bits as usize + (RESIDUAL_BITS_PER_COORD * d as f64).ceil() as usize
}

/// Largest serialized non-header and total bit counts over `trials` random unit inputs.
pub fn max_encoded_bits(cfg: &QuantConfig, trials: u64, seed: u64) -> Result<(usize, usize)> {
    let sizes = par_trials(trials, |t| {
        let x = random_unit(seed, t, cfg.d_orig());
        let code = quantize_two_stage(&x, cfg, seed, t)?;
        let bytes = encode(&code).map_err(|e| Error::Internal(e.to_string()))?;
        let report = rate_report(&code);
        if bytes.len() != report.total_bits.div_ceil(8) {
            return Err(Error::Internal(format!("{} bytes for {} bits", bytes.len(), report.total_bits)));
        }
        Ok((report.body_bits(), report.total_bits))
    })?;
    Ok(sizes.into_iter().fold((0, 0), |(b, t), (bb, tt)| (b.max(bb), t.max(tt))))
}

pub fn rate_suite(p: &Params) -> Result<Vec<ExperimentRow>> {
    let cfg = QuantConfig::new(p.dim, p.bits, p.mode)?;
    let d = cfg.dim();
    let start = Instant::now();
    let (body, total) = max_encoded_bits(&cfg, p.trials, p.seed)?;
    let budget = body_bit_budget(d, p.bits);
    let reference = d as f64 * (p.bits as f64 + RESIDUAL_BITS_PER_COORD);
    Ok(vec![
        ExperimentRow::new(
            "rate/max-body-bits",
            d,
            p.bits,
            p.trials,
            body as f64,
            reference,
            Criterion::AtMost(budget as f64),
            start,
        ),
        ExperimentRow::new(
            "rate/max-total-bits",
            d,
            p.bits,
            p.trials,
            total as f64,
            reference + crate::bitstream::HEADER_BITS as f64,
            Criterion::AtMost((budget + crate::bitstream::HEADER_BITS) as f64),
            start,
        ),
    ])
}

/// Largest `|(1/δ)∫ G over the cell at r| - quantile(r)|` over five interior `r`.
pub fn map_cell_average_error(buckets: usize) -> Result<f64> {
    let delta = 1.0 / (buckets - 1) as f64;
    [0.1, 0.3, 0.5, 0.77, 0.9].iter().try_fold(0.0f64, |worst, &r| {
        let (a, b) = (r - 0.5 * delta, r + 0.5 * delta);
        let mut failure = None;
        let integral = integrate(
            |s| {
                unbiased_map(s, buckets).unwrap_or_else(|e| {
                    failure = Some(e);
                    0.0
                })
            },
            a,
            b,
            &map_jump_points(buckets, a, b),
            1e-12,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(worst.max((integral / delta - quantile(r)?).abs()))
    })
}

/// Largest entrywise gap between the fast transform and the dense matrix, `d ∈ {1, 2, …, 16}`.
pub fn fwht_dense_gap(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for (k, d) in [1usize, 2, 4, 8, 16].into_iter().enumerate() {
        let h = oracle::dense_hadamard(d)?;
        let diag = sample_signs(seed, k as u64, d)?;
        let x = random_unit(seed, k as u64, d);
        let fast = apply_hd(&x, &diag)?;
        let plain = fwht_normalized(&x)?;
        for i in 0..d {
            let dense: f64 = (0..d).map(|j| h[i][j] * diag.signs()[j] * x[j]).sum();
            let dense_plain: f64 = (0..d).map(|j| h[i][j] * x[j]).sum();
            worst = worst.max((fast[i] - dense).abs()).max((plain[i] - dense_plain).abs());
        }
    }
    Ok(worst)
}

/// Largest `|‖HDx‖ - ‖x‖| / ‖x‖` at `d = 2^14` over a few Gaussian inputs.
pub fn norm_preservation_gap(seed: u64) -> Result<f64> {
    let d = 1 << 14;
    (0..8u64).try_fold(0.0f64, |worst, k| {
        let mut rng = auxiliary_rng(seed, k);
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = apply_hd(&x, &sample_signs(seed, k, d)?)?;
        let (nx, ny) = (dot(&x, &x).sqrt(), dot(&y, &y).sqrt());
        Ok(worst.max((nx - ny).abs() / nx))
    })
}

type Matcher = fn(&str) -> bool;

pub fn oracle_suite(p: &Params) -> Result<Vec<ExperimentRow>> {
    let start = Instant::now();
    let dims: Vec<usize> = [4, 8, 12].into_iter().filter(|&d| d <= p.dim.min(oracle::MAX_ENUM_DIM)).collect();
    let dims = if dims.is_empty() { vec![p.dim.clamp(1, oracle::MAX_ENUM_DIM)] } else { dims };
    let pairs = p.trials.max(1) as usize;
    let reports = oracle::lemma_reports(p.seed, &dims, pairs)?;
    let max_d = *dims.iter().max().expect("nonempty");
    let groups: [(&str, Matcher, f64); 5] = [
        ("oracle/fourth-moment-identity", |q| q == "E[X²Y²]", 1.0),
        ("oracle/fourth-moment-bound", |q| q == "E[X²Y²] ≤ 3", 3.0),
        ("oracle/mgf-identity", |q| q.starts_with("E e^(λX), "), 1.0),
        ("oracle/mgf-subgaussian", |q| q.starts_with("E e^(λX) ≤"), 1.0),
        ("oracle/exp-square-bound", |q| q.starts_with("E e^(X²/3)"), 3f64.sqrt()),
    ];
    let mut rows: Vec<ExperimentRow> = groups
        .iter()
        .map(|(name, select, reference)| {
            let worst = reports.iter().filter(|r| select(&r.quantity)).map(|r| r.excess()).fold(0.0, f64::max);
            ExperimentRow::new(
                *name,
                max_d,
                0,
                pairs as u64,
                worst,
                *reference,
                Criterion::AtMost(ENUMERATION_TOL),
                start,
            )
        })
        .collect();
    for buckets in [8usize, 64] {
        let start = Instant::now();
        let gap = map_cell_average_error(buckets)?;
        rows.push(ExperimentRow::new(
            format!("oracle/map-cell-average/B={buckets}"),
            1,
            buckets.trailing_zeros(),
            5,
            gap,
            0.0,
            Criterion::AtMost(MAP_AVERAGE_TOL),
            start,
        ));
    }
    let start = Instant::now();
    rows.push(ExperimentRow::new(
        "oracle/fwht-dense",
        16,
        0,
        5,
        fwht_dense_gap(p.seed)?,
        0.0,
        Criterion::AtMost(FWHT_TOL),
        start,
    ));
    let start = Instant::now();
    rows.push(ExperimentRow::new(
        "oracle/norm-preservation",
        1 << 14,
        0,
        8,
        norm_preservation_gap(p.seed)?,
        0.0,
        Criterion::AtMost(NORM_TOL),
        start,
    ));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let c = std::f64::consts::PI * 3f64.sqrt() / 2.0;
        assert!((MSE_CONSTANT - c).abs() < 1e-15);
        assert!((INNER_PRODUCT_CONSTANT - 48.369_087_602_567).abs() < 1e-9);
        assert!((RESIDUAL_BITS_PER_COORD - (3.0 + 0.5 / std::f64::consts::LN_2)).abs() < 1e-15);
        assert_eq!(body_bit_budget(64, 4), 256 + 239);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("speed".parse::<Suite>().is_err());
    }

    #[test]
    fn criteria() {
        assert!(Criterion::Within(2.3, 3.0).check(2.7));
        assert!(!Criterion::Within(2.3, 3.0).check(3.1));
        assert!(Criterion::AtMost(1.0).check(1.0));
        assert!(!Criterion::AtMost(1.0).check(f64::NAN));
        assert_eq!(Criterion::Within(2.3, 3.0).to_string(), "in [2.3, 3]");
    }

    #[test]
    fn small_runs_are_deterministic() {
        let p = Params { dim: 64, bits: 4, trials: 200, seed: 3, mode: Mode::Unbiased };
        for suite in [Suite::Mse, Suite::InnerProduct, Suite::Rate] {
            let a = suite.run(&p).unwrap();
            let b = suite.run(&p).unwrap();
            let strip = |rows: Vec<ExperimentRow>| {
                rows.into_iter().map(|r| (r.name, r.measured.to_bits(), r.pass)).collect::<Vec<_>>()
            };
            assert_eq!(strip(a), strip(b), "{suite}");
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = QuantConfig::new(128, 3, Mode::Biased).unwrap();
        let x = random_unit(1, 0, 128);
        let many = mse_statistic(&x, &cfg, 300, 5).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mse_statistic(&x, &cfg, 300, 5).unwrap());
        assert_eq!(many, one);
    }

    #[test]
    fn rate_rows_pass_at_small_dimension() {
        let p = Params { dim: 64, bits: 2, trials: 100, seed: 8, mode: Mode::Biased };
        assert!(rate_suite(&p).unwrap().iter().all(|r| r.pass));
    }
}
