//! Data-oblivious vector quantization with a randomized Hadamard rotation and
//! dithered scalar Gaussian codebooks, plus a residual stage for unbiased
//! inner-product estimation and a compact bitstream format.

pub mod bitstream;
pub mod codebook;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod residual;
pub mod rng;
pub mod transform;
pub mod twostage;
pub mod vquant;

pub use bitstream::{decode, decode_all, decode_prefix, encode, rate_report, CodecError, RateReport};
pub use codebook::{build_codebook, Mode, ScalarCodebook};
pub use error::{Error, Result};
pub use residual::ResidualCode;
pub use transform::SignDiagonal;
pub use twostage::{
    dequantize_two_stage, estimate_inner_product, quantize_two_stage, quantize_two_stage_scaled, TwoStageCode,
};
pub use vquant::{vector_dequant, vector_quant, QuantConfig, VectorCode};
