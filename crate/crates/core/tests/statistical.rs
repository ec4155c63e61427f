use hq_core::experiments::random_unit;
use hq_core::oracle::exact_vector_mse;
use hq_core::residual::{residual_dequant, residual_quant};
use hq_core::{vector_dequant, vector_quant, Mode, QuantConfig};

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn scaled(v: Vec<f64>, norm: f64) -> Vec<f64> {
    v.into_iter().map(|x| x * norm).collect()
}

#[test]
fn small_dimension_mse_matches_exact_enumeration() {
    let x = [0.8, -0.1, 0.5, 0.3];
    for (mode, bits) in [(Mode::Unbiased, 2), (Mode::Biased, 2), (Mode::Unbiased, 4)] {
        let cfg = QuantConfig::new(4, bits, mode).unwrap();
        let exact = exact_vector_mse(&x, cfg.buckets(), mode).unwrap();
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        let errs: Vec<f64> = (0..200_000)
            .map(|t| {
                let xt = vector_dequant(&vector_quant(&x, &cfg, 21, t).unwrap(), &cfg).unwrap();
                x.iter().zip(&xt).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / norm_sq
            })
            .collect();
        let (mean, se) = mean_and_se(&errs);
        assert!((mean - exact).abs() <= 3.0 * se, "{mode:?} b={bits}: MC {mean} ± {se}, exact {exact}");
    }
}

#[test]
fn residual_level_tail() {
    let d = 4096;
    let mut counts = [0u64; 8];
    let mut total = 0u64;
    for (t, norm) in [0.01, 0.1, 1.0, 2.0].into_iter().cycle().take(40).enumerate() {
        let r = scaled(random_unit(3, t as u64, d), norm);
        let code = residual_quant(&r, 16, 3, t as u64).unwrap();
        for &l in &code.levels {
            for (k, c) in counts.iter_mut().enumerate() {
                *c += u64::from(l as usize >= k);
            }
        }
        total += d as u64;
    }
    for (k, &c) in counts.iter().enumerate() {
        let bound = 2.0 * (-(4f64.powi(k as i32 - 1)) / 2.0).exp();
        let freq = c as f64 / total as f64;
        assert!(freq <= 2.0 * bound, "P(level >= {k}) = {freq} exceeds 2·{bound}");
    }
}

#[test]
fn residual_inner_product_error_bound() {
    let (d, buckets, norm) = (256, 16, 0.1);
    let r = scaled(random_unit(5, 0, d), norm);
    let y = random_unit(5, 1, d);
    let dot = |a: &[f64]| a.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>();
    let truth = dot(&r);
    let errs: Vec<f64> = (0..20_000)
        .map(|t| {
            (dot(&residual_dequant(&residual_quant(&r, buckets, 9, t).unwrap(), buckets, 9, t).unwrap()) - truth)
                .powi(2)
        })
        .collect();
    let (mean, _) = mean_and_se(&errs);
    let bound = 13.0 * (norm * norm + 1.0 / (buckets * buckets) as f64) / d as f64;
    assert!(mean <= bound, "mean-square error {mean} exceeds {bound}");
}
