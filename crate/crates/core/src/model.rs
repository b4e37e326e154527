//! Shared numeric primitives: complex samples, decibel conversion,
//! quantization and seeded random streams.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A complex baseband value. Everything that goes over the air is one of these.
pub type ComplexSample = Complex64;

/// `10·log10(x)` for strictly positive `x`.
pub fn db(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("db() needs a positive finite argument, got {x}")));
    }
    Ok(10.0 * x.log10())
}

/// Inverse of [`db`].
pub fn undb(decibels: f64) -> f64 {
    10f64.powf(decibels / 10.0)
}

/// Uniform quantizer over `[0, full_scale]` with `2^bits` codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSpec {
    bits: u32,
    full_scale: f64,
}

/// Output of [`QuantizationSpec::quantize`]. `clamped` is set when the input
/// fell outside `[0, full_scale]` and was saturated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    pub code: u32,
    pub clamped: bool,
}

impl QuantizationSpec {
    pub const MAX_BITS: u32 = 16;

    pub fn new(bits: u32, full_scale: f64) -> Result<Self> {
        if !(1..=Self::MAX_BITS).contains(&bits) {
            return Err(Error::domain(format!("bits must be in [1, 16], got {bits}")));
        }
        if !(full_scale > 0.0) || !full_scale.is_finite() {
            return Err(Error::domain(format!("full_scale must be positive, got {full_scale}")));
        }
        Ok(Self { bits, full_scale })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    pub fn lsb(&self) -> f64 {
        self.full_scale / f64::from(self.max_code())
    }

    /// Round-half-up onto the code grid; out-of-range inputs saturate.
    pub fn quantize(&self, value: f64) -> Quantized {
        let clamped = !(0.0..=self.full_scale).contains(&value);
        let v = if value.is_nan() {
            0.0
        } else {
            value.clamp(0.0, self.full_scale)
        };
        let code = (v / self.lsb() + 0.5).floor() as u32;
        Quantized {
            code: code.min(self.max_code()),
            clamped,
        }
    }

    pub fn dequantize(&self, code: u32) -> f64 {
        f64::from(code.min(self.max_code())) * self.lsb()
    }

    /// Bitwise one's complement of a code, `2^bits - 1 - code`.
    pub fn complement(&self, code: u32) -> u32 {
        self.max_code() - code.min(self.max_code())
    }
}

/// What a random stream is used for. Streams for different purposes never
/// share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Scenario = 1,
    Trial = 2,
    Values = 3,
    Weights = 4,
    Channel = 5,
    Pilot = 6,
    ReceiverNoise = 7,
    PhaseDrift = 8,
    Detection = 9,
    Request = 10,
}

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Child streams are derived with [`SeededRng::derive`], so per-sensor and
/// per-repetition draws stay fixed when unrelated sensors or grid points are
/// added.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh child stream keyed by `(purpose, index)`. Independent of how
    /// many values have already been drawn from `self`.
    pub fn derive(&self, purpose: Purpose, index: u64) -> SeededRng {
        let mut h = splitmix64(self.stream);
        h = splitmix64(h ^ purpose as u64);
        h = splitmix64(h ^ index);
        SeededRng::new(self.seed, h)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
