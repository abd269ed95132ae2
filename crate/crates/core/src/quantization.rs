//! Uniform midtread fixed-point quantizer, as a DAQ front end applies it to
//! each recorded component before any floating-point processing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub bits: u32,
    pub full_scale: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, full_scale: f64) -> Result<Self> {
        if !(1..=52).contains(&bits) {
            return Err(Error::param("bits", format!("must be in 1..=52, got {bits}")));
        }
        if !(full_scale > 0.0 && full_scale.is_finite()) {
            return Err(Error::param("full_scale", format!("must be > 0, got {full_scale}")));
        }
        Ok(QuantizerSpec { bits, full_scale })
    }

    pub fn with_bits(bits: u32) -> Result<Self> {
        Self::new(bits, 1.0)
    }

    /// Lowest two's-complement code.
    pub fn min_code(&self) -> f64 {
        -((1u64 << (self.bits - 1)) as f64)
    }

    /// Highest two's-complement code.
    pub fn max_code(&self) -> f64 {
        ((1u64 << (self.bits - 1)) - 1) as f64
    }

    /// Integer code for `x`, saturating at the rails. Ties round away from zero.
    #[inline(always)]
    pub fn code(&self, x: f64, step: f64) -> f64 {
        round_half_away(x / step).clamp(self.min_code(), self.max_code())
    }

    #[inline(always)]
    pub fn quantize(&self, x: f64) -> f64 {
        let step = step_size(self);
        self.code(x, step) * step
    }
}

/// Same result as [`f64::round`] for every input, written without a libm
/// call so that loops over it vectorize.
#[inline(always)]
pub fn round_half_away(v: f64) -> f64 {
    const TWO_52: f64 = 4_503_599_627_370_496.0;
    let a = v.abs();
    // Adding and removing 2^52 rounds to nearest, ties to even.
    let r = (a + TWO_52) - TWO_52;
    let r = if r - a == -0.5 { r + 1.0 } else { r };
    let r = if a >= TWO_52 { a } else { r };
    r.copysign(v)
}

/// `2 FS / 2^b`.
pub fn step_size(spec: &QuantizerSpec) -> f64 {
    2.0 * spec.full_scale / (1u64 << spec.bits) as f64
}

/// A quantized sequence plus the number of samples that hit a rail.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub samples: Vec<f64>,
    pub saturated: usize,
}

pub fn quantize_sequence(x: &[f64], spec: &QuantizerSpec) -> Quantized {
    let step = step_size(spec);
    let (lo, hi) = (spec.min_code(), spec.max_code());
    let mut saturated = 0;
    let samples = x
        .iter()
        .map(|&v| {
            let raw = round_half_away(v / step);
            if raw < lo || raw > hi {
                saturated += 1;
            }
            raw.clamp(lo, hi) * step
        })
        .collect();
    Quantized { samples, saturated }
}
