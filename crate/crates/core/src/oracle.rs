//! Brute-force and quadrature oracles.
//!
//! Nothing here calls the transform or codebook-construction code it is used
//! to check. The only shared primitives are [`codebook::cdf`] and
//! [`codebook::quantile`], which are themselves checked against
//! [`normal_cdf_series`].

use crate::codebook::{self, Mode};
use crate::error::{Error, Result};

/// Largest dimension accepted by the exhaustive enumerations (4096 patterns).
pub const MAX_ENUM_DIM: usize = 12;

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Standard normal CDF from the everywhere-positive erf series
/// `erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!`.
pub fn normal_cdf_series(x: f64) -> f64 {
    let y = (x / std::f64::consts::SQRT_2).abs();
    if y > 8.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let mut term = y;
    let mut acc = Neumaier::default();
    let mut n = 0.0;
    while term > 1e-17 * acc.total().max(1e-300) || n < 3.0 {
        acc.add(term);
        n += 1.0;
        term *= 2.0 * y * y / (2.0 * n + 1.0);
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * (-y * y).exp() * acc.total();
    if x >= 0.0 {
        0.5 + 0.5 * erf
    } else {
        0.5 - 0.5 * erf
    }
}

/// Explicit `d × d` normalized Sylvester Hadamard matrix, `d ≤ 16`.
pub fn dense_hadamard(d: usize) -> Result<Vec<Vec<f64>>> {
    if !d.is_power_of_two() || d > 16 {
        return Err(Error::NotPowerOfTwo(d));
    }
    let mut h = vec![vec![1.0]];
    while h.len() < d {
        let n = h.len();
        let mut next = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = h[i][j];
                next[i][j + n] = h[i][j];
                next[i + n][j] = h[i][j];
                next[i + n][j + n] = -h[i][j];
            }
        }
        h = next;
    }
    let scale = 1.0 / (d as f64).sqrt();
    for row in &mut h {
        row.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(h)
}

/// Exact `E f(ε)` over all `2^d` Rademacher sign patterns.
pub fn enumerate_rademacher_expectation<F>(d: usize, mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    let mut eps = vec![0.0; d];
    let mut acc = Neumaier::default();
    for pattern in 0u32..(1 << d) {
        for (j, e) in eps.iter_mut().enumerate() {
            *e = if pattern >> j & 1 == 1 { 1.0 } else { -1.0 };
        }
        acc.add(f(&eps));
    }
    Ok(acc.total() / (1u64 << d) as f64)
}

// QUADPACK 15-point Kronrod rule with embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

// One Gauss–Kronrod 15-point panel with the QUADPACK error heuristic.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut values = [(0.0, 0.0); 7];
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = WGK[7] * fc.abs();
    for i in 0..7 {
        let dx = h * XGK[i];
        let (lo, hi) = (f(c - dx), f(c + dx));
        values[i] = (lo, hi);
        kronrod += WGK[i] * (lo + hi);
        abs_sum += WGK[i] * (lo.abs() + hi.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        asc += WGK[i] * ((values[i].0 - mean).abs() + (values[i].1 - mean).abs());
    }
    let (abs_sum, asc) = (abs_sum * h.abs(), asc * h.abs());
    let mut err = ((kronrod - gauss) * h).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    (kronrod * h, err)
}

const MAX_INTERVALS: usize = 4000;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn splittable(a: f64, b: f64) -> bool {
    (b - a) > 64.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`, split at every
/// point of `breaks` inside the interval. `tol` is an absolute tolerance.
///
/// Global bisection: the piece with the largest error estimate is split
/// until the summed estimate meets `tol`, or meets the rounding floor of the
/// integral, or the interval budget runs out.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut pieces = Vec::new();
    for w in edges.windows(2) {
        let (value, err) = gk15(&mut f, w[0], w[1]);
        if !value.is_finite() {
            return Err(Error::NonConvergence { a: w[0], b: w[1] });
        }
        pieces.push(Piece { a: w[0], b: w[1], value, err });
    }
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.err).sum();
        let mut total = Neumaier::default();
        let mut magnitude = 0.0;
        for p in &pieces {
            total.add(p.value);
            magnitude += p.value.abs();
        }
        if total_err <= tol.max(100.0 * f64::EPSILON * magnitude) {
            return Ok(total.total());
        }
        let worst = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| splittable(p.a, p.b))
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| pieces.len() < MAX_INTERVALS) else {
            let p = pieces.iter().max_by(|x, y| x.err.total_cmp(&y.err)).expect("at least one piece");
            return Err(Error::NonConvergence { a: p.a, b: p.b });
        };
        let Piece { a: lo, b: hi, .. } = pieces.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        for (l, r) in [(lo, mid), (mid, hi)] {
            let (value, err) = gk15(&mut f, l, r);
            if !value.is_finite() {
                return Err(Error::NonConvergence { a: l, b: r });
            }
            pieces.push(Piece { a: l, b: r, value, err });
        }
    }
}

/// `∫₀¹ g(U) dU`, split at the supplied jump points of `g`.
pub fn u_average<G: FnMut(f64) -> f64>(g: G, breaks: &[f64]) -> Result<f64> {
    integrate(g, 0.0, 1.0, breaks, 1e-10)
}

/// Jump points `1/2 + (m + 1/2)δ` of the unbiased map inside `(a, b)`.
pub fn map_jump_points(buckets: usize, a: f64, b: f64) -> Vec<f64> {
    let delta = 1.0 / (buckets - 1) as f64;
    let lo = ((a - 0.5) / delta - 0.5).floor() as i64;
    let hi = ((b - 0.5) / delta - 0.5).ceil() as i64;
    (lo..=hi).map(|m| 0.5 + (m as f64 + 0.5) * delta).filter(|&x| x > a && x < b).collect()
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Values of `U` at which the unbiased `quant(t)` is discontinuous: the
/// bucket boundary `frac((B-1)F(t))` and `1/2`, where every centroid crosses
/// a jump of the unbiased map.
pub fn unbiased_u_breaks(t: f64, buckets: usize) -> Vec<f64> {
    let p = codebook::cdf(t).unwrap_or(0.5);
    vec![frac((buckets - 1) as f64 * p), 0.5]
}

/// Values of `U` at which the biased `quant(t)` is discontinuous.
pub fn biased_u_breaks(t: f64, buckets: usize) -> Vec<f64> {
    let p = codebook::cdf(t).unwrap_or(0.5);
    vec![frac(buckets as f64 * p)]
}

/// Unbiased reconstruction map by direct summation, written independently
/// of the codebook's construction: the derivative of the quantile is taken
/// as `sqrt(6π)·exp(q²/6)`.
pub fn unbiased_map_direct(r: f64, buckets: usize) -> f64 {
    let delta = 1.0 / (buckets - 1) as f64;
    // r = u + kδ with u - 1/2 ∈ (-δ/2, δ/2]
    let mut k = ((r - 0.5) / delta - 0.5).ceil() as i64;
    if r - k as f64 * delta <= 0.5 - 0.5 * delta {
        k -= 1;
    }
    let u = r - k as f64 * delta;
    let deriv = |s: f64| -> f64 {
        if s <= 0.0 || s >= 1.0 {
            return f64::INFINITY;
        }
        let q = codebook::quantile(s).unwrap();
        (6.0 * std::f64::consts::PI).sqrt() * (q * q / 6.0).exp()
    };
    let base = if u >= 1.0 { f64::INFINITY } else { codebook::quantile(u).unwrap() };
    let mut acc = Neumaier::default();
    acc.add(base);
    let steps: Box<dyn Iterator<Item = i64>> = if k > 0 { Box::new(0..k) } else { Box::new(k..0) };
    let sign = if k > 0 { 1.0 } else { -1.0 };
    for j in steps {
        acc.add(sign * delta * deriv(u + (j as f64 + 0.5) * delta));
    }
    acc.total()
}

/// `quant(t)` for `(B, U, mode)` computed from the bucket formulas alone.
pub fn scalar_quant_value(t: f64, buckets: usize, offset: f64, mode: Mode) -> Result<f64> {
    let p = codebook::cdf(t)?;
    let b = buckets as f64;
    match mode {
        Mode::Biased => {
            let j = (b * p - offset).floor().clamp(0.0, b - 1.0);
            let lo = if j == 0.0 { 0.0 } else { (j + offset) / b };
            let hi = if j == b - 1.0 { 1.0 } else { (j + 1.0 + offset) / b };
            codebook::quantile(0.5 * (lo + hi))
        }
        Mode::Unbiased => {
            let j = ((b - 1.0) * p - offset).floor() + 1.0;
            let j = j.clamp(0.0, b - 1.0);
            Ok(unbiased_map_direct((j + offset - 0.5) / (b - 1.0), buckets))
        }
    }
}

/// `E_U (t - quant(t))²` by quadrature over the dither offset.
pub fn scalar_expected_sq_error(t: f64, buckets: usize, mode: Mode) -> Result<f64> {
    let breaks = match mode {
        Mode::Biased => biased_u_breaks(t, buckets),
        Mode::Unbiased => unbiased_u_breaks(t, buckets),
    };
    integrate(
        |u| {
            let q = scalar_quant_value(t, buckets, u, mode).unwrap_or(f64::NAN);
            (t - q) * (t - q)
        },
        0.0,
        1.0,
        &breaks,
        1e-9,
    )
}

/// Exact `E_{D,U} ‖x - x̃‖²` for a small power-of-two dimension: every sign
/// diagonal is enumerated, `z = √d·H D x` is formed with the dense matrix and
/// the per-coordinate error is integrated over `U`.
pub fn exact_vector_mse(x: &[f64], buckets: usize, mode: Mode) -> Result<f64> {
    let d = x.len();
    let h = dense_hadamard(d)?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let sqrt_d = (d as f64).sqrt();
    let mut failure = None;
    let value = enumerate_rademacher_expectation(d, |eps| {
        let mut total = 0.0;
        for row in &h {
            let z: f64 = sqrt_d * row.iter().zip(&unit).zip(eps).map(|((hij, xj), ej)| hij * xj * ej).sum::<f64>();
            match scalar_expected_sq_error(z, buckets, mode) {
                Ok(e) => total += e,
                Err(e) => failure = Some(e),
            }
        }
        total / d as f64
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// How a report's `exact` value is judged against `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    /// `|exact - reference| ≤ tol`.
    Equal,
    /// `exact ≤ reference + tol`.
    AtMost,
}

/// Outcome of one exhaustive-enumeration check.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationReport {
    pub d: usize,
    pub quantity: String,
    pub exact: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub check: Check,
}

impl EnumerationReport {
    fn new(d: usize, quantity: String, exact: f64, reference: f64, check: Check) -> Self {
        Self { d, quantity, exact, reference, abs_error: (exact - reference).abs(), check }
    }

    /// Distance past the check: `abs_error` for equalities, the overshoot for bounds.
    pub fn excess(&self) -> f64 {
        match self.check {
            Check::Equal => self.abs_error,
            Check::AtMost => (self.exact - self.reference).max(0.0),
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        match self.check {
            Check::Equal => self.abs_error <= tol,
            Check::AtMost => self.exact <= self.reference + tol,
        }
    }
}

fn unit_vector(rng: &mut impl rand::Rng, d: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rademacher-sum lemmas checked by exhaustive enumeration for `d ∈ dims`
/// with `pairs` random unit coefficient pairs per dimension:
/// the mixed fourth moment identity and its bound of 3, the moment
/// generating function against `∏ cosh(λaⱼ)` and `e^{λ²/2}`, and
/// `E e^{X²/3} ≤ √3`.
pub fn lemma_reports(seed: u64, dims: &[usize], pairs: usize) -> Result<Vec<EnumerationReport>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &d in dims {
        for _ in 0..pairs {
            let a = unit_vector(&mut rng, d);
            let b = unit_vector(&mut rng, d);
            let fourth = enumerate_rademacher_expectation(d, |e| {
                let x = dot(&a, e);
                let y = dot(&b, e);
                x * x * y * y
            })?;
            let ab = dot(&a, &b);
            let diag: f64 = a.iter().zip(&b).map(|(x, y)| x * x * y * y).sum();
            out.push(EnumerationReport::new(
                d,
                "E[X²Y²]".into(),
                fourth,
                1.0 + 2.0 * ab * ab - 2.0 * diag,
                Check::Equal,
            ));
            out.push(EnumerationReport::new(d, "E[X²Y²] ≤ 3".into(), fourth, 3.0, Check::AtMost));

            for step in -6..=6 {
                let lambda = step as f64 * 0.5;
                let mgf = enumerate_rademacher_expectation(d, |e| (lambda * dot(&a, e)).exp())?;
                let product: f64 = a.iter().map(|aj| (lambda * aj).cosh()).product();
                out.push(EnumerationReport::new(d, format!("E e^(λX), λ={lambda}"), mgf, product, Check::Equal));
                out.push(EnumerationReport::new(
                    d,
                    format!("E e^(λX) ≤ e^(λ²/2), λ={lambda}"),
                    mgf,
                    (0.5 * lambda * lambda).exp(),
                    Check::AtMost,
                ));
            }

            let sq = enumerate_rademacher_expectation(d, |e| {
                let x = dot(&a, e);
                (x * x / 3.0).exp()
            })?;
            out.push(EnumerationReport::new(d, "E e^(X²/3) ≤ √3".into(), sq, 3f64.sqrt(), Check::AtMost));
        }
    }
    Ok(out)
}
