//! Round-based aggregates over the OR-channel: max, min by one's
//! complement, and percentiles by count-driven interval search.

use crate::error::{Error, Result};
use crate::linagg::{self, AirSession};
use crate::model::{Purpose, QuantizationSpec, SeededRng};
use crate::phy::{self, ChannelEstimate, DetectionConfig, Fleet};

/// A fleet used as an OR-channel.
#[derive(Debug, Clone, Copy)]
pub struct OrChannel<'a> {
    pub fleet: &'a Fleet,
    pub detection: DetectionConfig,
    /// Pilot samples in the request that starts a protocol run; sensors use
    /// the estimate only to phase-align their tones.
    pub pilot_samples: usize,
}

impl<'a> OrChannel<'a> {
    pub fn new(fleet: &'a Fleet, detection: DetectionConfig) -> Self {
        Self {
            fleet,
            detection,
            pilot_samples: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitRound {
    /// 1-based, MSB first.
    pub round: u32,
    /// Sensors still in contention when the round starts.
    pub active_count: usize,
    /// Sensors that actually transmitted.
    pub transmitting: usize,
    pub energy: f64,
    pub threshold: f64,
    pub detected: bool,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitRoundTranscript {
    pub bits: u32,
    pub rounds: Vec<BitRound>,
    /// The protocol's answer. For [`compute_min`] this is the complement of
    /// the value spelled by the round bits.
    pub resolved_value: u32,
    pub complemented: bool,
}

impl BitRoundTranscript {
    /// Concatenation of the round bits, MSB first.
    pub fn round_bits_value(&self) -> u32 {
        self.rounds.iter().fold(0, |acc, r| (acc << 1) | u32::from(r.bit))
    }

    pub fn active_set_non_increasing(&self) -> bool {
        self.rounds.windows(2).all(|w| w[1].active_count <= w[0].active_count)
    }
}

fn validate_codes(codes: &[u32], bits: u32) -> Result<()> {
    if codes.is_empty() {
        return Err(Error::domain("bitwise protocols need at least one sensor"));
    }
    if !(1..=QuantizationSpec::MAX_BITS).contains(&bits) {
        return Err(Error::domain(format!("bits must be in [1, 16], got {bits}")));
    }
    let max = (1u32 << bits) - 1;
    if let Some((i, c)) = codes.iter().enumerate().find(|(_, &c)| c > max) {
        return Err(Error::domain(format!(
            "sensor {i}: code {c} does not fit in {bits} bits"
        )));
    }
    Ok(())
}

fn run_max(codes: &[u32], bits: u32, or: &OrChannel<'_>, rng: &SeededRng) -> Result<BitRoundTranscript> {
    validate_codes(codes, bits)?;
    if codes.len() != or.fleet.len() {
        return Err(Error::domain(format!(
            "{} codes for a fleet of {} sensors",
            codes.len(),
            or.fleet.len()
        )));
    }
    let estimates: Vec<ChannelEstimate> = or
        .fleet
        .estimate_all(or.pilot_samples, &rng.derive(Purpose::Request, 0))?;
    let mut contenders: Vec<usize> = (0..codes.len()).collect();
    let mut rounds = Vec::with_capacity(bits as usize);
    let mut resolved = 0u32;
    for k in 0..bits {
        let pos = bits - 1 - k;
        let transmitting: Vec<usize> = contenders
            .iter()
            .copied()
            .filter(|&i| (codes[i] >> pos) & 1 == 1)
            .collect();
        let mut slot_rng = rng.derive(Purpose::Detection, u64::from(k));
        let det = phy::detect_energy(&transmitting, &estimates, or.fleet, &or.detection, &mut slot_rng)?;
        let bit = u8::from(det.detected);
        rounds.push(BitRound {
            round: k + 1,
            active_count: contenders.len(),
            transmitting: transmitting.len(),
            energy: det.statistic,
            threshold: det.threshold,
            detected: det.detected,
            bit,
        });
        resolved = (resolved << 1) | u32::from(bit);
        // Only sensors whose bit agrees with the resolved one stay in contention.
        contenders.retain(|&i| (codes[i] >> pos) & 1 == u32::from(bit));
    }
    Ok(BitRoundTranscript {
        bits,
        rounds,
        resolved_value: resolved,
        complemented: false,
    })
}

/// Maximum code over the fleet in exactly `bits` OR-channel rounds, MSB
/// first. In each round only sensors matching every resolved bit and holding
/// a 1 at the current position transmit.
pub fn compute_max(codes: &[u32], bits: u32, or: &OrChannel<'_>, rng: &SeededRng) -> Result<BitRoundTranscript> {
    run_max(codes, bits, or, rng)
}

/// Minimum code: the max of the one's complements, complemented back.
pub fn compute_min(codes: &[u32], bits: u32, or: &OrChannel<'_>, rng: &SeededRng) -> Result<BitRoundTranscript> {
    validate_codes(codes, bits)?;
    let max = (1u32 << bits) - 1;
    let complements: Vec<u32> = codes.iter().map(|c| max - c).collect();
    let mut t = run_max(&complements, bits, or, rng)?;
    t.resolved_value = max - t.resolved_value;
    t.complemented = true;
    Ok(t)
}

/// Prior used to place the next split point of a percentile search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPrior {
    /// Plain bisection.
    #[default]
    None,
    /// Assume readings are spread evenly inside the bracket and split where
    /// the target rank is expected.
    Uniform,
}

/// One interval-count request `lo <= code < hi_exclusive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalCount {
    pub lo: u32,
    pub hi_exclusive: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileSearchState {
    pub q: f64,
    pub prior: SearchPrior,
    pub min_code: u32,
    pub max_code: u32,
    pub total: u64,
    /// 1-based rank of the order statistic being searched for.
    pub target_rank: u64,
    /// Answer lies in `[lo, hi]`.
    pub lo: u32,
    pub hi: u32,
    /// Readings known to be below `lo`.
    pub below: u64,
    /// Readings known to be at or below `hi`.
    pub upto: u64,
    pub history: Vec<IntervalCount>,
}

impl PercentileSearchState {
    /// Interval-count requests issued so far.
    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    /// Next split point `s`; the following request counts `lo <= code <= s`.
    /// `bisect` forces plain bisection for this step.
    fn next_split(&self, bisect: bool) -> u32 {
        let width = self.hi - self.lo;
        let half = self.lo + width / 2;
        let m = self.upto.saturating_sub(self.below);
        if bisect || self.prior == SearchPrior::None || m == 0 {
            return half;
        }
        // Expected position of the target inside the bracket if the m
        // readings there are spread evenly over its width + 1 codes.
        let t = self.target_rank.saturating_sub(self.below) as f64;
        let frac = (t - 0.5) / m as f64;
        let est = f64::from(self.lo) + frac * f64::from(width + 1) - 0.5;
        (est.round().max(f64::from(self.lo)) as u32).min(self.hi - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileOutcome {
    pub value: f64,
    pub code: u32,
    pub state: PercentileSearchState,
    pub min: BitRoundTranscript,
    pub max: BitRoundTranscript,
}

/// Order-statistic rank used for quantile `q` of `n` readings: the smallest
/// reading with at least `q·n` readings at or below it. For the median of an
/// even count this is the lower middle value.
pub fn target_rank(q: f64, n: u64) -> u64 {
    ((q * n as f64).ceil() as u64).clamp(1, n.max(1))
}

/// Quantile `q` of the fleet's readings.
///
/// Min and max come from the bitwise protocols and the total from a count
/// request with an always-true predicate. The bracket `[lo, hi]` of codes is
/// then narrowed with half-open interval counts until it holds one code.
pub fn compute_percentile(
    values: &[f64],
    q: f64,
    spec: &QuantizationSpec,
    or: &OrChannel<'_>,
    session: &AirSession<'_>,
    prior: SearchPrior,
    rng: &SeededRng,
) -> Result<PercentileOutcome> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile must be in (0, 1), got {q}")));
    }
    if values.is_empty() {
        return Err(Error::domain("percentile needs at least one sensor"));
    }
    let codes: Vec<u32> = values.iter().map(|&v| spec.quantize(v).code).collect();
    let min = compute_min(&codes, spec.bits(), or, &rng.derive(Purpose::Request, 1))?;
    let max = compute_max(&codes, spec.bits(), or, &rng.derive(Purpose::Request, 2))?;
    let (min_code, max_code) = (min.resolved_value, max.resolved_value);

    let count_rng = rng.derive(Purpose::Request, 3);
    let total = linagg::count_flags(
        &vec![true; values.len()],
        session,
        &count_rng.derive(Purpose::Request, 0),
    )?
    .value
    .primary() as u64;
    let rank = target_rank(q, total);
    let (lo, hi) = if min_code <= max_code {
        (min_code, max_code)
    } else {
        (max_code, min_code)
    };
    let mut state = PercentileSearchState {
        q,
        prior,
        min_code,
        max_code,
        total,
        target_rank: rank,
        lo,
        hi,
        below: 0,
        upto: total,
        history: Vec::new(),
    };

    let mut bisect = false;
    while state.lo < state.hi {
        let width_before = state.hi - state.lo + 1;
        let split = state.next_split(bisect);
        let hi_exclusive = split + 1;
        let flags: Vec<bool> = codes.iter().map(|&c| state.lo <= c && c < hi_exclusive).collect();
        let index = state.history.len() as u64 + 1;
        let count = linagg::count_flags(&flags, session, &count_rng.derive(Purpose::Request, index))?
            .value
            .primary() as u64;
        state.history.push(IntervalCount {
            lo: state.lo,
            hi_exclusive,
            count,
        });
        let cumulative = (state.below + count).clamp(state.below, state.upto);
        if cumulative >= rank {
            state.hi = split;
            state.upto = cumulative;
        } else {
            state.lo = hi_exclusive;
            state.below = cumulative;
        }
        // An interpolated split that did not halve the bracket is followed
        // by one bisection step.
        bisect = !bisect && 2 * (state.hi - state.lo + 1) > width_before;
    }
    let code = state.lo;
    Ok(PercentileOutcome {
        value: spec.dequantize(code),
        code,
        state,
        min,
        max,
    })
}
