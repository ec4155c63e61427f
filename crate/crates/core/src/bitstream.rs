//! `.hq` wire format.
//!
//! A payload is a 36-byte header followed by a bit-packed body:
//!
//! | bytes  | field                                     |
//! |--------|-------------------------------------------|
//! | 0..4   | magic `HQ01`                              |
//! | 4      | version                                   |
//! | 5      | mode (0 biased, 1 unbiased)               |
//! | 6      | bits per coordinate `b`                   |
//! | 7      | residual scale index                      |
//! | 8..12  | `d_orig`, u32 little-endian               |
//! | 12..20 | seed, u64 little-endian                   |
//! | 20..28 | vector counter, u64 little-endian         |
//! | 28..36 | norm, f64 little-endian                   |
//!
//! The body holds `d` indices of `b` bits each, then, if the scale index is
//! nonzero, the levels as unary words `1^ℓ 0` and `d` sign bits (`1` for
//! `+1`). Bits fill each byte from the least significant end; the last byte
//! is zero-padded.

use thiserror::Error;

use crate::codebook::Mode;
use crate::residual::ResidualCode;
use crate::twostage::TwoStageCode;
use crate::vquant::{QuantConfig, VectorCode, MAX_BITS};

pub const MAGIC: [u8; 4] = *b"HQ01";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 36;
pub const HEADER_BITS: usize = 8 * HEADER_BYTES;
/// Longest unary level accepted by the decoder.
pub const MAX_LEVEL: u32 = 64;
/// Largest `d_orig` accepted by the decoder.
pub const MAX_DIM: u32 = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown mode byte {0}")]
    InvalidMode(u8),
    #[error("bit width {0} outside 1..=16")]
    InvalidBitWidth(u8),
    #[error("dimension {0} outside 1..=2^30")]
    InvalidDimension(u32),
    #[error("norm {0} is not finite and non-negative")]
    InvalidNorm(f64),
    #[error("stream truncated: needed {needed} bits, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("nonzero padding bits")]
    NonZeroPadding,
    #[error("level of coordinate {0} exceeds 64")]
    LevelOverrun(usize),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("index {index} does not fit in {bits} bits")]
    IndexOverflow { index: u16, bits: u32 },
    #[error("field {field} does not fit: {value}")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("inconsistent code: {0}")]
    Inconsistent(String),
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    fn write(&mut self, value: u64, bits: u32) {
        debug_assert!(bits <= 32 && (bits == 64 || value >> bits == 0));
        self.acc |= value << self.filled;
        self.filled += bits;
        while self.filled >= 8 {
            self.bytes.push(self.acc as u8);
            self.acc >>= 8;
            self.filled -= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push(self.acc as u8);
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn available(&self) -> usize {
        8 * self.bytes.len() - self.pos
    }

    fn require(&self, needed: usize) -> Result<(), CodecError> {
        if needed > self.available() {
            Err(CodecError::Truncated { needed, available: self.available() })
        } else {
            Ok(())
        }
    }

    fn bit(&mut self) -> Result<bool, CodecError> {
        self.require(1)?;
        let b = self.bytes[self.pos / 8] >> (self.pos % 8) & 1;
        self.pos += 1;
        Ok(b == 1)
    }

    fn read(&mut self, bits: u32) -> Result<u64, CodecError> {
        self.require(bits as usize)?;
        let mut value = 0u64;
        for i in 0..bits {
            let b = self.bytes[self.pos / 8] >> (self.pos % 8) & 1;
            value |= (b as u64) << i;
            self.pos += 1;
        }
        Ok(value)
    }
}

/// Bit counts of one encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateReport {
    pub header_bits: usize,
    pub idx_bits: usize,
    pub level_bits: usize,
    pub sign_bits: usize,
    /// All of the above; excludes the final-byte padding.
    pub total_bits: usize,
}

impl RateReport {
    /// Bits spent beyond the header.
    pub fn body_bits(&self) -> usize {
        self.total_bits - self.header_bits
    }
}

pub fn rate_report(code: &TwoStageCode) -> RateReport {
    let d = code.config.dim();
    let idx_bits = d * code.config.bits() as usize;
    let (level_bits, sign_bits) = if code.residual.idx_sigma == 0 { (0, 0) } else { (code.residual.level_bits(), d) };
    RateReport {
        header_bits: HEADER_BITS,
        idx_bits,
        level_bits,
        sign_bits,
        total_bits: HEADER_BITS + idx_bits + level_bits + sign_bits,
    }
}

/// Serializes one code.
pub fn encode(code: &TwoStageCode) -> Result<Vec<u8>, CodecError> {
    let cfg = &code.config;
    let d = cfg.dim();
    let bits = cfg.bits();
    let d_orig = u32::try_from(cfg.d_orig())
        .ok()
        .filter(|&v| v <= MAX_DIM)
        .ok_or(CodecError::FieldOverflow { field: "d_orig", value: cfg.d_orig() as u64 })?;
    if code.base.idx.len() != d || code.residual.levels.len() != d || code.residual.signs.len() != d {
        return Err(CodecError::Inconsistent(format!(
            "dimension {d} with {} indices, {} levels, {} signs",
            code.base.idx.len(),
            code.residual.levels.len(),
            code.residual.signs.len()
        )));
    }
    if !code.base.norm.is_finite() || code.base.norm < 0.0 {
        return Err(CodecError::InvalidNorm(code.base.norm));
    }

    let mut out = Vec::with_capacity(HEADER_BYTES + (d * (bits as usize + 4)).div_ceil(8));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(cfg.mode().as_byte());
    out.push(bits as u8);
    out.push(code.residual.idx_sigma);
    out.extend_from_slice(&d_orig.to_le_bytes());
    out.extend_from_slice(&code.base.seed.to_le_bytes());
    out.extend_from_slice(&code.base.vec_counter.to_le_bytes());
    out.extend_from_slice(&code.base.norm.to_le_bytes());

    let mut w = BitWriter::default();
    for &j in &code.base.idx {
        if u32::from(j) >> bits != 0 {
            return Err(CodecError::IndexOverflow { index: j, bits });
        }
        w.write(j.into(), bits);
    }
    if code.residual.idx_sigma > 0 {
        for (i, &l) in code.residual.levels.iter().enumerate() {
            if u32::from(l) > MAX_LEVEL {
                return Err(CodecError::LevelOverrun(i));
            }
            for _ in 0..l {
                w.write(1, 1);
            }
            w.write(0, 1);
        }
        for (i, &s) in code.residual.signs.iter().enumerate() {
            match s {
                1 => w.write(1, 1),
                -1 => w.write(0, 1),
                _ => return Err(CodecError::Inconsistent(format!("sign {i} is {s}"))),
            }
        }
    } else if code.residual.levels.iter().any(|&l| l != 0) || code.residual.signs.iter().any(|&s| s != 0) {
        return Err(CodecError::Inconsistent("trivial residual with nonzero levels or signs".into()));
    }
    out.extend(w.finish());
    Ok(out)
}

/// Decodes exactly one payload spanning all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<TwoStageCode, CodecError> {
    let (code, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - used));
    }
    Ok(code)
}

/// Decodes the payload at the start of `bytes`; returns it with its length in bytes.
pub fn decode_prefix(bytes: &[u8]) -> Result<(TwoStageCode, usize), CodecError> {
    if bytes.len() < HEADER_BYTES {
        return Err(CodecError::Truncated { needed: HEADER_BITS, available: 8 * bytes.len() });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(CodecError::UnsupportedVersion(bytes[4]));
    }
    let mode = Mode::from_byte(bytes[5]).ok_or(CodecError::InvalidMode(bytes[5]))?;
    let bits = bytes[6];
    if !(1..=MAX_BITS).contains(&u32::from(bits)) {
        return Err(CodecError::InvalidBitWidth(bits));
    }
    let idx_sigma = bytes[7];
    let d_orig = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if d_orig == 0 || d_orig > MAX_DIM {
        return Err(CodecError::InvalidDimension(d_orig));
    }
    let seed = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let vec_counter = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes"));
    let norm = f64::from_le_bytes(bytes[28..36].try_into().expect("8 bytes"));
    if !norm.is_finite() || norm < 0.0 {
        return Err(CodecError::InvalidNorm(norm));
    }
    let config =
        QuantConfig::new(d_orig as usize, bits.into(), mode).map_err(|e| CodecError::Inconsistent(e.to_string()))?;
    let d = config.dim();

    let mut r = BitReader { bytes: &bytes[HEADER_BYTES..], pos: 0 };
    r.require(d * bits as usize)?;
    let idx = (0..d).map(|_| r.read(bits.into()).map(|v| v as u16)).collect::<Result<Vec<_>, _>>()?;
    let residual = if idx_sigma == 0 {
        ResidualCode::trivial(d)
    } else {
        // every level takes at least one bit and every sign exactly one
        r.require(2 * d)?;
        let mut levels = Vec::with_capacity(d);
        for i in 0..d {
            let mut l = 0u32;
            while r.bit()? {
                l += 1;
                if l > MAX_LEVEL {
                    return Err(CodecError::LevelOverrun(i));
                }
            }
            levels.push(l as u8);
        }
        r.require(d)?;
        let signs = (0..d).map(|_| r.bit().map(|b| if b { 1 } else { -1 })).collect::<Result<Vec<i8>, _>>()?;
        ResidualCode { idx_sigma, levels, signs }
    };
    let body_bytes = r.pos.div_ceil(8);
    let tail = r.pos % 8;
    if tail != 0 && r.bytes[body_bytes - 1] >> tail != 0 {
        return Err(CodecError::NonZeroPadding);
    }
    let code = TwoStageCode { config, base: VectorCode { idx, norm, seed, vec_counter }, residual };
    Ok((code, HEADER_BYTES + body_bytes))
}

/// Decodes a concatenation of payloads.
pub fn decode_all(mut bytes: &[u8]) -> Result<Vec<TwoStageCode>, CodecError> {
    let mut codes = Vec::new();
    while !bytes.is_empty() {
        let (code, used) = decode_prefix(bytes)?;
        codes.push(code);
        bytes = &bytes[used..];
    }
    Ok(codes)
}
