//! Aggregates that reduce to over-the-air sums: sum, mean, geometric mean,
//! weighted average, predicate count, variance and simple linear regression.
//!
//! Every function remaps its per-sensor quantity onto the transmit range
//! `[0, 1]` with an affine map known to the cluster-head, runs one request
//! (pilots, then `M1` joint repetitions) per moment, and inverts the map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Purpose, QuantizationSpec, SeededRng};
use crate::phy::{self, Fleet, JointReception, JointTxConfig};
use crate::planner::Plan;

/// The fleet plus the repetition counts used for every request.
#[derive(Debug, Clone, Copy)]
pub struct AirSession<'a> {
    pub fleet: &'a Fleet,
    pub m1: usize,
    pub m2: usize,
    /// Upper end of the sensor reading range.
    pub full_scale: f64,
}

impl<'a> AirSession<'a> {
    pub fn new(fleet: &'a Fleet, m1: usize, m2: usize, full_scale: f64) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::domain(format!("session needs m1, m2 >= 1 (got {m1}, {m2})")));
        }
        if !(full_scale > 0.0) || !full_scale.is_finite() {
            return Err(Error::domain("full_scale must be positive"));
        }
        Ok(Self {
            fleet,
            m1,
            m2,
            full_scale,
        })
    }

    pub fn from_plan(fleet: &'a Fleet, plan: &Plan, full_scale: f64) -> Result<Self> {
        Self::new(fleet, plan.m1 as usize, plan.m2 as usize, full_scale)
    }

    pub fn n(&self) -> usize {
        self.fleet.len()
    }
}

/// Affine map of `[lo, hi]` onto the transmit range `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueMap {
    pub lo: f64,
    pub hi: f64,
}

impl ValueMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain(format!("empty value range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }

    /// Returns the transmit value and whether it had to be clamped.
    pub fn forward(&self, v: f64) -> (f64, bool) {
        let u = (v - self.lo) / self.span();
        if (0.0..=1.0).contains(&u) {
            (u, false)
        } else {
            (if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) }, true)
        }
    }

    /// Sum of `count` original values from the received sum of mapped values.
    pub fn invert_sum(&self, received: f64, count: f64) -> f64 {
        count * self.lo + self.span() * received
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    True,
    /// `x > threshold`
    Above {
        threshold: f64,
    },
    /// `x < threshold`
    Below {
        threshold: f64,
    },
    /// Half-open `lo <= x < hi`.
    Between {
        lo: f64,
        hi: f64,
    },
    /// Closed `lo <= x <= hi`.
    Within {
        lo: f64,
        hi: f64,
    },
}

impl Predicate {
    pub fn eval(&self, x: f64) -> bool {
        match *self {
            Predicate::True => true,
            Predicate::Above { threshold } => x > threshold,
            Predicate::Below { threshold } => x < threshold,
            Predicate::Between { lo, hi } => lo <= x && x < hi,
            Predicate::Within { lo, hi } => lo <= x && x <= hi,
        }
    }
}

/// How the cluster-head learns the `N` it divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanDivisor {
    /// Fleet size known in advance.
    #[default]
    Configured,
    /// Measured with a count request whose predicate is always true.
    Counted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregateValue {
    Scalar(f64),
    Count(u64),
    Line { intercept: f64, slope: f64 },
}

impl AggregateValue {
    /// The value as one real: the slope for a fitted line.
    pub fn primary(&self) -> f64 {
        match *self {
            AggregateValue::Scalar(v) => v,
            AggregateValue::Count(c) => c as f64,
            AggregateValue::Line { slope, .. } => slope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMoment {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Largest imaginary leakage over all requests.
    pub imag_residual: f64,
    pub clamp_count: usize,
    /// Over-the-air requests issued.
    pub requests: usize,
    /// Joint repetitions per request.
    pub repetitions: usize,
    pub variance_clamped: bool,
    /// Divisor source for means; `None` when no division happened.
    pub divisor: Option<(MeanDivisor, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub value: AggregateValue,
    pub moments: Vec<RawMoment>,
    pub diagnostics: Diagnostics,
    /// Running estimate of the value after each repetition, for single-request
    /// functions; empty otherwise.
    pub trace: Vec<f64>,
}

impl AggregateResult {
    pub fn moment(&self, name: &str) -> Option<f64> {
        self.moments.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

struct Request {
    received: f64,
    reception: JointReception,
    clamped: usize,
    participants: usize,
}

fn run_request(
    quantities: &[Option<f64>],
    map: ValueMap,
    session: &AirSession<'_>,
    index: u64,
    rng: &SeededRng,
) -> Result<Request> {
    let n = session.n();
    let mut tx = vec![0.0; n];
    let mut participants = Vec::new();
    let mut clamped = 0;
    for (i, q) in quantities.iter().enumerate() {
        if let Some(v) = q {
            let (u, c) = map.forward(*v);
            clamped += usize::from(c);
            tx[i] = u;
            participants.push(i);
        }
    }
    let req_rng = rng.derive(Purpose::Request, index);
    // Silent sensors still hear the pilots.
    let estimates = session.fleet.estimate_all(session.m2, &req_rng)?;
    let cfg = JointTxConfig::new(session.m1, participants)?;
    let count = cfg.participants.len();
    let reception = phy::joint_transmit(&tx, &estimates, session.fleet, &cfg, &req_rng)?;
    Ok(Request {
        received: reception.value,
        reception,
        clamped,
        participants: count,
    })
}

fn check_len(values: usize, session: &AirSession<'_>) -> Result<()> {
    if values != session.n() {
        return Err(Error::domain(format!(
            "{} values supplied for a fleet of {} sensors",
            values,
            session.n()
        )));
    }
    Ok(())
}

fn record(diag: &mut Diagnostics, req: &Request, m1: usize) {
    diag.requests += 1;
    diag.repetitions = m1;
    diag.clamp_count += req.clamped;
    diag.imag_residual = diag.imag_residual.max(req.reception.imag_residual().abs());
}

fn all(values: &[f64]) -> Vec<Option<f64>> {
    values.iter().copied().map(Some).collect()
}

/// Over-the-air sum of readings in `[0, full_scale]`.
pub fn aggregate_sum(values: &[f64], session: &AirSession<'_>, rng: &SeededRng) -> Result<AggregateResult> {
    check_len(values.len(), session)?;
    let map = ValueMap::new(0.0, session.full_scale)?;
    let req = run_request(&all(values), map, session, 0, rng)?;
    let n = req.participants as f64;
    let sum = map.invert_sum(req.received, n);
    let trace = req
        .reception
        .running_means()
        .into_iter()
        .map(|r| map.invert_sum(r, n))
        .collect();
    let mut diagnostics = Diagnostics::default();
    record(&mut diagnostics, &req, session.m1);
    Ok(AggregateResult {
        value: AggregateValue::Scalar(sum),
        moments: vec![RawMoment {
            name: "sum",
            value: sum,
        }],
        diagnostics,
        trace,
    })
}

/// Sum divided by `N`, where `N` is configured or counted over the air.
pub fn aggregate_mean(
    values: &[f64],
    divisor: MeanDivisor,
    session: &AirSession<'_>,
    rng: &SeededRng,
) -> Result<AggregateResult> {
    let mut out = aggregate_sum(values, session, rng)?;
    let sum = out.value.primary();
    let n = match divisor {
        MeanDivisor::Configured => session.n() as f64,
        MeanDivisor::Counted => {
            let flags = vec![true; session.n()];
            let counted = count_requests(&flags, session, 1, rng, &mut out.diagnostics)?;
            counted.max(1) as f64
        }
    };
    let mean = sum / n;
    out.value = AggregateValue::Scalar(mean);
    out.moments.push(RawMoment { name: "n", value: n });
    out.moments.push(RawMoment {
        name: "E(x)",
        value: mean,
    });
    out.trace.iter_mut().for_each(|v| *v /= n);
    out.diagnostics.divisor = Some((divisor, n));
    Ok(out)
}

fn mean_of(
    quantities: &[Option<f64>],
    map: ValueMap,
    session: &AirSession<'_>,
    index: u64,
    rng: &SeededRng,
    diag: &mut Diagnostics,
) -> Result<(f64, Request)> {
    let req = run_request(quantities, map, session, index, rng)?;
    record(diag, &req, session.m1);
    let n = session.n() as f64;
    Ok((map.invert_sum(req.received, req.participants as f64) / n, req))
}

/// Geometric mean via the arithmetic mean of logarithms. Readings below
/// `log_floor` are rejected.
pub fn aggregate_geometric_mean(
    values: &[f64],
    log_floor: f64,
    session: &AirSession<'_>,
    rng: &SeededRng,
) -> Result<AggregateResult> {
    check_len(values.len(), session)?;
    if !(log_floor > 0.0) || log_floor >= session.full_scale {
        return Err(Error::domain(format!(
            "log floor must be in (0, full_scale), got {log_floor}"
        )));
    }
    for (sensor, &value) in values.iter().enumerate() {
        if !(value >= log_floor) {
            return Err(Error::NonPositiveValue {
                sensor,
                value,
                floor: log_floor,
            });
        }
    }
    let map = ValueMap::new(log_floor.ln(), session.full_scale.ln())?;
    let logs: Vec<Option<f64>> = values.iter().map(|v| Some(v.ln())).collect();
    let mut diagnostics = Diagnostics::default();
    let (mean_log, req) = mean_of(&logs, map, session, 0, rng, &mut diagnostics)?;
    let n = session.n() as f64;
    let trace = req
        .reception
        .running_means()
        .into_iter()
        .map(|r| (map.invert_sum(r, n) / n).exp())
        .collect();
    diagnostics.divisor = Some((MeanDivisor::Configured, n));
    Ok(AggregateResult {
        value: AggregateValue::Scalar(mean_log.exp()),
        moments: vec![RawMoment {
            name: "E(log x)",
            value: mean_log,
        }],
        diagnostics,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedOptions {
    /// Divide by `Σw` to get a weighted average rather than a weighted sum.
    pub normalize: bool,
}

impl Default for WeightedOptions {
    fn default() -> Self {
        Self { normalize: true }
    }
}

/// Each sensor sends `w_i·x_i`. The cluster-head assigned the weights, so it
/// knows `Σw` and the largest weight used for the transmit map. Negative
/// products are clamped and counted.
pub fn aggregate_weighted(
    values: &[f64],
    weights: &[f64],
    options: WeightedOptions,
    session: &AirSession<'_>,
    rng: &SeededRng,
) -> Result<AggregateResult> {
    check_len(values.len(), session)?;
    if weights.len() != values.len() {
        return Err(Error::domain(format!(
            "{} weights for {} values",
            weights.len(),
            values.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::domain("weights must be finite"));
    }
    let w_max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if w_max == 0.0 {
        return Err(Error::domain("all weights are zero"));
    }
    let total_weight: f64 = weights.iter().sum();
    if options.normalize && total_weight == 0.0 {
        return Err(Error::domain("weights sum to zero, cannot normalize"));
    }
    let map = ValueMap::new(0.0, w_max * session.full_scale)?;
    let products: Vec<Option<f64>> = values.iter().zip(weights).map(|(x, w)| Some(w * x)).collect();
    let req = run_request(&products, map, session, 0, rng)?;
    let n = req.participants as f64;
    let divide = if options.normalize { total_weight } else { 1.0 };
    let weighted_sum = map.invert_sum(req.received, n);
    let trace = req
        .reception
        .running_means()
        .into_iter()
        .map(|r| map.invert_sum(r, n) / divide)
        .collect();
    let mut diagnostics = Diagnostics::default();
    record(&mut diagnostics, &req, session.m1);
    Ok(AggregateResult {
        value: AggregateValue::Scalar(weighted_sum / divide),
        moments: vec![
            RawMoment {
                name: "sum(wx)",
                value: weighted_sum,
            },
            RawMoment {
                name: "sum(w)",
                value: total_weight,
            },
        ],
        diagnostics,
        trace,
    })
}

fn count_requests(
    flags: &[bool],
    session: &AirSession<'_>,
    index: u64,
    rng: &SeededRng,
    diag: &mut Diagnostics,
) -> Result<u64> {
    let (received, _) = count_raw(flags, session, index, rng, diag)?;
    Ok(round_count(received, session.n()))
}

fn round_count(received: f64, n: usize) -> u64 {
    received.round().clamp(0.0, n as f64) as u64
}

fn count_raw(
    flags: &[bool],
    session: &AirSession<'_>,
    index: u64,
    rng: &SeededRng,
    diag: &mut Diagnostics,
) -> Result<(f64, Request)> {
    check_len(flags.len(), session)?;
    let ones: Vec<Option<f64>> = flags.iter().map(|&f| f.then_some(1.0)).collect();
    let map = ValueMap::new(0.0, 1.0)?;
    let req = run_request(&ones, map, session, index, rng)?;
    record(diag, &req, session.m1);
    Ok((req.received, req))
}

/// Count of sensors whose flag is set; flagged sensors send 1, the rest stay
/// silent. The received sum is rounded and clamped to `[0, N]`.
pub fn count_flags(flags: &[bool], session: &AirSession<'_>, rng: &SeededRng) -> Result<AggregateResult> {
    let mut diagnostics = Diagnostics::default();
    let (received, req) = count_raw(flags, session, 0, rng, &mut diagnostics)?;
    let n = session.n();
    let trace = req
        .reception
        .running_means()
        .into_iter()
        .map(|r| round_count(r, n) as f64)
        .collect();
    Ok(AggregateResult {
        value: AggregateValue::Count(round_count(received, n)),
        moments: vec![RawMoment {
            name: "received",
            value: received,
        }],
        diagnostics,
        trace,
    })
}

/// Number of sensors whose reading satisfies `predicate`.
pub fn aggregate_count(
    values: &[f64],
    predicate: Predicate,
    session: &AirSession<'_>,
    rng: &SeededRng,
) -> Result<AggregateResult> {
    let flags: Vec<bool> = values.iter().map(|&v| predicate.eval(v)).collect();
    count_flags(&flags, session, rng)
}

/// `E(x²) − E(x)²`, clamped at zero. The flag reports a clamp.
pub fn variance_from_moments(mean_sq: f64, mean: f64) -> (f64, bool) {
    let v = mean_sq - mean * mean;
    if v < 0.0 {
        (0.0, true)
    } else {
        (v, false)
    }
}

/// Population variance from two over-the-air means.
pub fn aggregate_variance(values: &[f64], session: &AirSession<'_>, rng: &SeededRng) -> Result<AggregateResult> {
    check_len(values.len(), session)?;
    let fs = session.full_scale;
    let mut diagnostics = Diagnostics::default();
    let squares: Vec<Option<f64>> = values.iter().map(|x| Some(x * x)).collect();
    let (mean_sq, _) = mean_of(
        &squares,
        ValueMap::new(0.0, fs * fs)?,
        session,
        0,
        rng,
        &mut diagnostics,
    )?;
    let (mean, _) = mean_of(&all(values), ValueMap::new(0.0, fs)?, session, 1, rng, &mut diagnostics)?;
    let (variance, clamped) = variance_from_moments(mean_sq, mean);
    diagnostics.variance_clamped = clamped;
    diagnostics.divisor = Some((MeanDivisor::Configured, session.n() as f64));
    Ok(AggregateResult {
        value: AggregateValue::Scalar(variance),
        moments: vec![
            RawMoment {
                name: "E(x^2)",
                value: mean_sq,
            },
            RawMoment {
                name: "E(x)",
                value: mean,
            },
        ],
        diagnostics,
        trace: Vec::new(),
    })
}

/// Value ranges of the regressor and the response, needed for the transmit maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionRanges {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Smallest acceptable `E(x²) − E(x)²`; `None` means `1e-9·(x span)²`.
    pub tolerance: Option<f64>,
}

impl RegressionRanges {
    pub fn unit(full_scale: f64) -> Self {
        Self {
            x: (0.0, full_scale),
            y: (0.0, full_scale),
            tolerance: None,
        }
    }

    fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(1e-9 * (self.x.1 - self.x.0).powi(2))
    }
}

fn product_range(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn square_range(a: (f64, f64)) -> (f64, f64) {
    let hi = a.0.powi(2).max(a.1.powi(2));
    let lo = if a.0 <= 0.0 && a.1 >= 0.0 {
        0.0
    } else {
        a.0.powi(2).min(a.1.powi(2))
    };
    (lo, hi)
}

/// Closed-form least-squares line `y = α + β·x` from the four moments.
pub fn line_from_moments(e_xy: f64, e_x: f64, e_y: f64, e_x2: f64, tolerance: f64) -> Result<(f64, f64)> {
    let spread = e_x2 - e_x * e_x;
    if spread.abs() < tolerance {
        return Err(Error::DegenerateRegressor { spread, tolerance });
    }
    let slope = (e_xy - e_x * e_y) / spread;
    Ok((e_y - slope * e_x, slope))
}

/// Simple linear regression from `E(xy)`, `E(x)`, `E(y)`, `E(x²)`.
pub fn aggregate_regression(
    pairs: &[(f64, f64)],
    ranges: RegressionRanges,
    session: &AirSession<'_>,
    rng: &SeededRng,
) -> Result<AggregateResult> {
    check_len(pairs.len(), session)?;
    let mut diagnostics = Diagnostics::default();
    let xy_map = {
        let (lo, hi) = product_range(ranges.x, ranges.y);
        ValueMap::new(lo, hi)?
    };
    let x2_map = {
        let (lo, hi) = square_range(ranges.x);
        ValueMap::new(lo, hi)?
    };
    let x_map = ValueMap::new(ranges.x.0, ranges.x.1)?;
    let y_map = ValueMap::new(ranges.y.0, ranges.y.1)?;

    let xy: Vec<Option<f64>> = pairs.iter().map(|(x, y)| Some(x * y)).collect();
    let xs: Vec<Option<f64>> = pairs.iter().map(|(x, _)| Some(*x)).collect();
    let ys: Vec<Option<f64>> = pairs.iter().map(|(_, y)| Some(*y)).collect();
    let x2: Vec<Option<f64>> = pairs.iter().map(|(x, _)| Some(x * x)).collect();

    let (e_xy, _) = mean_of(&xy, xy_map, session, 0, rng, &mut diagnostics)?;
    let (e_x, _) = mean_of(&xs, x_map, session, 1, rng, &mut diagnostics)?;
    let (e_y, _) = mean_of(&ys, y_map, session, 2, rng, &mut diagnostics)?;
    let (e_x2, _) = mean_of(&x2, x2_map, session, 3, rng, &mut diagnostics)?;
    let (intercept, slope) = line_from_moments(e_xy, e_x, e_y, e_x2, ranges.tolerance())?;
    diagnostics.divisor = Some((MeanDivisor::Configured, session.n() as f64));
    Ok(AggregateResult {
        value: AggregateValue::Line { intercept, slope },
        moments: vec![
            RawMoment {
                name: "E(xy)",
                value: e_xy,
            },
            RawMoment {
                name: "E(x)",
                value: e_x,
            },
            RawMoment {
                name: "E(y)",
                value: e_y,
            },
            RawMoment {
                name: "E(x^2)",
                value: e_x2,
            },
        ],
        diagnostics,
        trace: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateFunction {
    Sum,
    Mean,
    GeometricMean,
    WeightedAvg,
    Count,
    Variance,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateOptions {
    pub log_floor: f64,
    pub weighted: WeightedOptions,
    pub divisor: MeanDivisor,
    /// Defaults to `[0, full_scale]` on both axes.
    pub regression: Option<RegressionRanges>,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            log_floor: 1e-2,
            weighted: WeightedOptions::default(),
            divisor: MeanDivisor::Configured,
            regression: None,
        }
    }
}

/// A complete request: which function, its parameters, the resolution and
/// the plan whose `(M1, M2)` every moment uses.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRequest {
    pub function: AggregateFunction,
    pub predicate: Option<Predicate>,
    pub weights: Option<Vec<f64>>,
    pub resolution: QuantizationSpec,
    pub plan: Plan,
    pub options: AggregateOptions,
}

impl AggregateRequest {
    pub fn new(function: AggregateFunction, resolution: QuantizationSpec, plan: Plan) -> Self {
        Self {
            function,
            predicate: None,
            weights: None,
            resolution,
            plan,
            options: AggregateOptions::default(),
        }
    }

    pub fn with_predicate(mut self, predicate: Predicate) -> Self {
        self.predicate = Some(predicate);
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let weighted = self.function == AggregateFunction::WeightedAvg;
        if weighted != self.weights.is_some() {
            return Err(Error::domain(
                "weights must be given exactly when the function is weighted_avg",
            ));
        }
        let count = self.function == AggregateFunction::Count;
        if count != self.predicate.is_some() {
            return Err(Error::domain(
                "a predicate must be given exactly when the function is count",
            ));
        }
        if count {
            let needed = u64::BITS - (n as u64).leading_zeros();
            if self.resolution.bits() < needed {
                return Err(Error::domain(format!(
                    "counting {n} sensors exactly needs at least {needed} bits, request has {}",
                    self.resolution.bits()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AggregateInput<'a> {
    Values(&'a [f64]),
    Pairs(&'a [(f64, f64)]),
}

/// Runs `request` over `fleet`.
pub fn aggregate(
    request: &AggregateRequest,
    input: AggregateInput<'_>,
    fleet: &Fleet,
    rng: &SeededRng,
) -> Result<AggregateResult> {
    request.validate(fleet.len())?;
    let session = AirSession::from_plan(fleet, &request.plan, request.resolution.full_scale())?;
    let opts = &request.options;
    match (request.function, input) {
        (AggregateFunction::Regression, AggregateInput::Pairs(pairs)) => {
            let ranges = opts
                .regression
                .unwrap_or_else(|| RegressionRanges::unit(session.full_scale));
            aggregate_regression(pairs, ranges, &session, rng)
        }
        (AggregateFunction::Regression, AggregateInput::Values(_)) => {
            Err(Error::domain("regression needs (x, y) pairs"))
        }
        (_, AggregateInput::Pairs(_)) => Err(Error::domain("only regression takes (x, y) pairs")),
        (function, AggregateInput::Values(values)) => match function {
            AggregateFunction::Sum => aggregate_sum(values, &session, rng),
            AggregateFunction::Mean => aggregate_mean(values, opts.divisor, &session, rng),
            AggregateFunction::GeometricMean => aggregate_geometric_mean(values, opts.log_floor, &session, rng),
            AggregateFunction::WeightedAvg => {
                let weights = request.weights.as_deref().unwrap_or_default();
                aggregate_weighted(values, weights, opts.weighted, &session, rng)
            }
            AggregateFunction::Count => {
                let predicate = request.predicate.unwrap_or(Predicate::True);
                aggregate_count(values, predicate, &session, rng)
            }
            AggregateFunction::Variance => aggregate_variance(values, &session, rng),
            AggregateFunction::Regression => unreachable!(),
        },
    }
}
