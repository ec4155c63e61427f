//! Fixtures shared by the benchmarks.

use hq_core::{encode, quantize_two_stage, Mode, QuantConfig, TwoStageCode};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub const DIMS: [usize; 3] = [256, 1024, 4096];

/// Unit vector with Gaussian direction.
pub fn unit_vector(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    x
}

pub fn config(d: usize, bits: u32) -> QuantConfig {
    QuantConfig::new(d, bits, Mode::Unbiased).expect("valid benchmark config")
}

pub fn two_stage_code(d: usize, bits: u32) -> TwoStageCode {
    quantize_two_stage(&unit_vector(d, 1), &config(d, bits), 3, 0).expect("unit input")
}

pub fn payload(d: usize, bits: u32) -> Vec<u8> {
    encode(&two_stage_code(d, bits)).expect("encodable code")
}
