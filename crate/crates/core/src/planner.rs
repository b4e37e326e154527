//! Repetition planning: effective SNR of the over-the-air sum, the SNR
//! needed for `b` bits, the cheapest `(M1, M2)` meeting it, and the
//! throughput gain over sequential per-sensor transmission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db, undb};

/// Plans with more than this many samples are flagged as impractical.
pub const IMPRACTICAL_SAMPLES: f64 = 1e6;

/// SNR (dB) an ideal `bits`-bit quantizer achieves on a full-scale sine.
pub fn required_snr_db(bits: u32) -> f64 {
    6.02 * f64::from(bits) + 1.76
}

/// SNR of the averaged sum for `n` sensors at linear channel SNR `snr`,
/// with `m1` data repetitions and `m2` pilot samples.
pub fn effective_snr(n: f64, snr: f64, m1: f64, m2: f64) -> Result<f64> {
    if !(n >= 1.0) || !(snr > 0.0) || !(m1 > 0.0) || !(m2 > 0.0) {
        return Err(Error::domain(format!(
            "effective_snr needs n >= 1 and positive snr, m1, m2 (got n={n}, snr={snr}, m1={m1}, m2={m2})"
        )));
    }
    Ok(n * n * snr / (1.0 / m1 + n / m2))
}

/// Sequential baseline: each sensor sends its reading on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineModel {
    pub bits_per_measurement: u32,
    /// bits/second
    pub link_rate: f64,
    /// Hz
    pub bandwidth: f64,
}

impl Default for BaselineModel {
    fn default() -> Self {
        Self {
            bits_per_measurement: 8,
            link_rate: 250_000.0,
            bandwidth: 2_000_000.0,
        }
    }
}

impl BaselineModel {
    pub fn validate(&self) -> Result<()> {
        if self.bits_per_measurement == 0 {
            return Err(Error::config("baseline.bits_per_measurement", "must be >= 1"));
        }
        if !(self.link_rate > 0.0) || !self.link_rate.is_finite() {
            return Err(Error::config("baseline.link_rate", "must be positive"));
        }
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::config("baseline.bandwidth", "must be positive"));
        }
        Ok(())
    }

    /// Nyquist-rate ADC, twice the signal bandwidth.
    pub fn adc_rate(&self) -> f64 {
        2.0 * self.bandwidth
    }

    /// `M_D`: ADC samples spanned by one measurement at the link rate.
    pub fn samples_per_measurement(&self) -> u64 {
        (f64::from(self.bits_per_measurement) * self.adc_rate() / self.link_rate).ceil() as u64
    }
}

/// An operating point and its cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub n: u64,
    pub snr_db: f64,
    pub bits: u32,
    pub required_snr_db: f64,
    pub l: f64,
    pub m1_continuous: f64,
    pub m2_continuous: f64,
    pub m1: u64,
    pub m2: u64,
    pub m_d: u64,
    /// Effective SNR at the continuous optimum.
    pub snr_eff_db: f64,
    /// Effective SNR at the integer plan.
    pub snr_eff_integer_db: f64,
    /// `N·M_D/(M1+M2)` with continuous repetition counts.
    pub gain: f64,
    /// `N·M_D/(M1+M2)` with the integer plan that simulation uses.
    pub gain_integer: f64,
    pub feasible: bool,
    pub impractical: bool,
}

impl Plan {
    /// Field names in the order of [`Plan::record`].
    pub const FIELDS: [&'static str; 17] = [
        "n",
        "snr_db",
        "bits",
        "required_snr_db",
        "l",
        "m1_continuous",
        "m2_continuous",
        "m1",
        "m2",
        "m_d",
        "snr_eff_db",
        "snr_eff_integer_db",
        "gain",
        "gain_integer",
        "feasible",
        "impractical",
        "total_samples",
    ];

    pub fn total_samples(&self) -> u64 {
        self.m1 + self.m2
    }

    /// Flat record of every field, full precision.
    pub fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.snr_db.to_string(),
            self.bits.to_string(),
            self.required_snr_db.to_string(),
            self.l.to_string(),
            self.m1_continuous.to_string(),
            self.m2_continuous.to_string(),
            self.m1.to_string(),
            self.m2.to_string(),
            self.m_d.to_string(),
            self.snr_eff_db.to_string(),
            self.snr_eff_integer_db.to_string(),
            self.gain.to_string(),
            self.gain_integer.to_string(),
            u8::from(self.feasible).to_string(),
            u8::from(self.impractical).to_string(),
            self.total_samples().to_string(),
        ]
    }
}

/// Cheapest `(M1, M2)` reaching `bits` of resolution on the sum, with the
/// baseline cost taken from `baseline`.
pub fn optimal_plan(n: u64, snr_db: f64, bits: u32, baseline: &BaselineModel) -> Result<Plan> {
    baseline.validate()?;
    optimal_plan_with_md(n, snr_db, bits, baseline.samples_per_measurement())
}

/// As [`optimal_plan`] with an explicit `M_D`.
pub fn optimal_plan_with_md(n: u64, snr_db: f64, bits: u32, m_d: u64) -> Result<Plan> {
    if n == 0 {
        return Err(Error::domain("plan needs at least one sensor"));
    }
    if bits == 0 {
        return Err(Error::domain("plan needs bits >= 1"));
    }
    if !snr_db.is_finite() {
        return Err(Error::domain(format!("snr_db must be finite, got {snr_db}")));
    }
    let nf = n as f64;
    let snr = undb(snr_db);
    let required = required_snr_db(bits);
    let l = nf * snr * 10f64.powf(-required / 10.0);
    let root_n = nf.sqrt();
    let m1_continuous = (1.0 + root_n) / (l * nf);
    let m2_continuous = root_n * m1_continuous;
    let m1 = m1_continuous.ceil().max(1.0);
    let m2 = m2_continuous.ceil().max(1.0);
    let snr_eff_db = db(effective_snr(nf, snr, m1_continuous, m2_continuous)?)?;
    let snr_eff_integer_db = db(effective_snr(nf, snr, m1, m2)?)?;
    let md = m_d as f64;
    Ok(Plan {
        n,
        snr_db,
        bits,
        required_snr_db: required,
        l,
        m1_continuous,
        m2_continuous,
        m1: m1 as u64,
        m2: m2 as u64,
        m_d,
        snr_eff_db,
        snr_eff_integer_db,
        gain: nf * md / (m1_continuous + m2_continuous),
        gain_integer: nf * md / (m1 + m2),
        // Ceilings only add samples; the tolerance absorbs rounding in db().
        feasible: snr_eff_integer_db >= required - 1e-9,
        impractical: m1 + m2 > IMPRACTICAL_SAMPLES,
    })
}

/// Throughput gain for sum-family functions written directly in terms of
/// `N`, SNR and `M_D`, without going through `(M1, M2)`.
pub fn closed_form_gain(n: u64, snr_db: f64, bits: u32, m_d: u64) -> f64 {
    let nf = n as f64;
    let root_n = nf.sqrt();
    nf.powi(3) / (root_n + 1.0).powi(2) * undb(snr_db) * m_d as f64 * 10f64.powf(-required_snr_db(bits) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainFunction {
    Sum,
    Max,
}

impl GainFunction {
    pub fn as_str(&self) -> &'static str {
        match self {
            GainFunction::Sum => "sum",
            GainFunction::Max => "max",
        }
    }
}

/// Cost of one OR-channel round of the max protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCost {
    pub slot_samples: u64,
    pub request_overhead_samples: u64,
}

impl RoundCost {
    pub fn samples(&self) -> u64 {
        self.slot_samples + self.request_overhead_samples
    }
}

/// Gain of the bitwise max protocol: `b` rounds of fixed cost regardless of `N`.
pub fn max_gain(n: u64, bits: u32, m_d: u64, round: RoundCost) -> f64 {
    (n * m_d) as f64 / (f64::from(bits) * round.samples() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    pub n: u64,
    pub snr_db: f64,
    pub bits: u32,
    pub function: GainFunction,
    /// Continuous-optimum gain (sum) or exact round-count gain (max).
    pub gain: f64,
    /// Gain with integer repetition counts.
    pub gain_integer: f64,
}

/// Gain over the `(N, SNR)` grid, `N` outermost.
pub fn gain_curve(
    ns: &[u64],
    snrs_db: &[f64],
    bits: u32,
    baseline: &BaselineModel,
    function: GainFunction,
    round: RoundCost,
) -> Result<Vec<GainPoint>> {
    if ns.is_empty() || snrs_db.is_empty() {
        return Err(Error::domain("gain_curve needs non-empty N and SNR ranges"));
    }
    if function == GainFunction::Max && round.samples() == 0 {
        return Err(Error::domain("max round cost must be at least one sample"));
    }
    baseline.validate()?;
    let m_d = baseline.samples_per_measurement();
    let mut out = Vec::with_capacity(ns.len() * snrs_db.len());
    for &n in ns {
        for &snr_db in snrs_db {
            let (gain, gain_integer) = match function {
                GainFunction::Sum => {
                    let p = optimal_plan_with_md(n, snr_db, bits, m_d)?;
                    (p.gain, p.gain_integer)
                }
                GainFunction::Max => {
                    let g = max_gain(n, bits, m_d, round);
                    (g, g)
                }
            };
            out.push(GainPoint {
                n,
                snr_db,
                bits,
                function,
                gain,
                gain_integer,
            });
        }
    }
    Ok(out)
}
