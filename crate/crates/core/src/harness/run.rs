use rand::Rng;
use rayon::prelude::*;

use super::config::{FunctionKind, ScenarioConfig};
use crate::bitagg::{self, OrChannel};
use crate::channel::LinkBudget;
use crate::error::{Error, Result};
use crate::linagg::{
    self, AggregateFunction, AggregateInput, AggregateOptions, AggregateRequest, AirSession, RegressionRanges,
    WeightedOptions,
};
use crate::model::{Purpose, QuantizationSpec, SeededRng};
use crate::phy::Fleet;
use crate::planner::{self, GainFunction, Plan, IMPRACTICAL_SAMPLES};

/// Mean transmit power of a reading drawn uniformly over the transmit
/// range `[0, 1]`; the link budget's `P`.
pub const READING_POWER: f64 = 1.0 / 3.0;

/// Inputs of one trial, regenerated from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInputs {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub true_value: f64,
    pub computed_value: f64,
    pub abs_error: f64,
    /// MSB first.
    pub bit_correct: Vec<bool>,
    /// Joint repetitions (linear functions) or OR rounds plus count
    /// repetitions (bitwise functions).
    pub repetitions_used: u64,
    /// First averaging depth whose running estimate has every bit right.
    pub first_exact_depth: Option<usize>,
    /// Signed error of the running estimate after each repetition.
    pub depth_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n: u64,
    pub snr_db: f64,
    pub bits: u32,
    pub function: FunctionKind,
    pub m1: u64,
    pub m2: u64,
    pub m_d: u64,
    /// Gain of the configuration actually simulated.
    pub gain_analytic: f64,
    /// Gain at the continuous optimum.
    pub gain_continuous: f64,
    pub rms_error: f64,
    pub lsb: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Per-depth statistics of the running estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthStat {
    pub depth: usize,
    /// Trials with each bit correct, MSB first.
    pub bit_correct: Vec<usize>,
    pub exact: usize,
    pub rms_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub summary: Summary,
    pub plan: Plan,
    pub trials: Vec<TrialOutcome>,
    pub depth: Vec<DepthStat>,
}

impl RunRecord {
    pub fn median_first_exact_depth(&self) -> Option<usize> {
        let mut d: Vec<usize> = self
            .trials
            .iter()
            .map(|t| t.first_exact_depth.unwrap_or(usize::MAX))
            .collect();
        d.sort_unstable();
        let m = d[(d.len() - 1) / 2];
        (m != usize::MAX).then_some(m)
    }
}

/// One grid point with everything fixed except the trial draws.
#[derive(Debug, Clone)]
struct Point<'a> {
    cfg: &'a ScenarioConfig,
    n: u64,
    snr_db: f64,
    plan: Plan,
    m1: u64,
    m2: u64,
    link: LinkBudget,
    spec: QuantizationSpec,
    lsb: f64,
    base: SeededRng,
}

/// Error-code bits: `round(|err| / lsb)` saturated to `b` bits; a bit is
/// correct when the error code has a zero there.
pub fn error_bits(abs_error: f64, lsb: f64, bits: u32) -> Vec<bool> {
    let code = error_code(abs_error, lsb, bits);
    (0..bits).map(|k| code >> (bits - 1 - k) & 1 == 0).collect()
}

fn error_code(abs_error: f64, lsb: f64, bits: u32) -> u64 {
    let max = (1u64 << bits) - 1;
    let c = (abs_error / lsb).round();
    if c.is_nan() || c >= max as f64 {
        max
    } else {
        c as u64
    }
}

/// Key of a grid point in the seed tree, so a point's draws do not depend
/// on which other points share the sweep.
fn point_key(n: u64, snr_db: f64) -> u64 {
    n.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ snr_db.to_bits()
}

fn value_lsb(cfg: &ScenarioConfig, n: u64) -> Result<f64> {
    let fs = cfg.full_scale;
    let range = match cfg.function {
        FunctionKind::Sum => n as f64 * fs,
        FunctionKind::Mean | FunctionKind::GeometricMean | FunctionKind::WeightedAvg => {
            if cfg.function == FunctionKind::WeightedAvg && !cfg.request.normalize {
                n as f64 * fs
            } else {
                fs
            }
        }
        FunctionKind::Count => return Ok(1.0),
        FunctionKind::Variance => fs * fs / 4.0,
        // Slopes of the synthetic pairs live in [-1, 1].
        FunctionKind::Regression => 2.0,
        FunctionKind::Max | FunctionKind::Min | FunctionKind::Percentile => fs,
    };
    Ok(QuantizationSpec::new(cfg.bits, range)?.lsb())
}

fn point<'a>(cfg: &'a ScenarioConfig, n: u64, snr_db: f64) -> Result<Point<'a>> {
    let plan = planner::optimal_plan_with_md(n, snr_db, cfg.bits, cfg.baseline.m_d())?;
    let m1 = cfg.request.m1.unwrap_or(plan.m1);
    let m2 = cfg.request.m2.unwrap_or(plan.m2);
    if cfg.function != FunctionKind::Max && cfg.function != FunctionKind::Min && (m1 + m2) as f64 > IMPRACTICAL_SAMPLES
    {
        return Err(Error::config(
            "request.m1",
            format!(
                "plan at N = {n}, {snr_db} dB needs {} samples per request; set request.m1/m2",
                m1 + m2
            ),
        ));
    }
    let link = if cfg.noiseless {
        LinkBudget::noiseless(READING_POWER)?
    } else {
        LinkBudget::from_snr_db(READING_POWER, snr_db)?
    };
    Ok(Point {
        cfg,
        n,
        snr_db,
        plan,
        m1,
        m2,
        link,
        spec: QuantizationSpec::new(cfg.bits, cfg.full_scale)?,
        lsb: value_lsb(cfg, n)?,
        base: SeededRng::new(cfg.seed, 0).derive(Purpose::Scenario, point_key(n, snr_db)),
    })
}

/// Readings, weights and (x, y) pairs for one trial.
pub fn trial_inputs(cfg: &ScenarioConfig, n: u64, rng: &SeededRng) -> TrialInputs {
    let fs = cfg.full_scale;
    let lo = if cfg.function == FunctionKind::GeometricMean {
        cfg.request.log_floor
    } else {
        0.0
    };
    let mut values = Vec::with_capacity(n as usize);
    let mut weights = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..n {
        let mut r = rng.derive(Purpose::Values, i);
        let x = lo + r.random::<f64>() * (fs - lo);
        values.push(x);
        if cfg.function == FunctionKind::WeightedAvg {
            weights.push(rng.derive(Purpose::Weights, i).random_range(0.1..=1.0));
        }
        if cfg.function == FunctionKind::Regression {
            let noise = (r.random::<f64>() - 0.5) * 0.2 * fs;
            pairs.push((x, (0.25 * fs + 0.5 * x + noise).clamp(0.0, fs)));
        }
    }
    TrialInputs { values, weights, pairs }
}

/// The aggregate computed directly from the inputs.
pub fn oracle(cfg: &ScenarioConfig, inputs: &TrialInputs) -> Result<f64> {
    let x = &inputs.values;
    let n = x.len() as f64;
    let mean = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>() / n;
    let spec = QuantizationSpec::new(cfg.bits, cfg.full_scale)?;
    let mut codes: Vec<u32> = x.iter().map(|&v| spec.quantize(v).code).collect();
    Ok(match cfg.function {
        FunctionKind::Sum => x.iter().sum(),
        FunctionKind::Mean => mean(&mut x.iter().copied()),
        FunctionKind::GeometricMean => mean(&mut x.iter().map(|v| v.ln())).exp(),
        FunctionKind::WeightedAvg => {
            let s: f64 = x.iter().zip(&inputs.weights).map(|(x, w)| x * w).sum();
            if cfg.request.normalize {
                s / inputs.weights.iter().sum::<f64>()
            } else {
                s
            }
        }
        FunctionKind::Count => {
            let p = cfg.predicate();
            x.iter().filter(|&&v| p.eval(v)).count() as f64
        }
        FunctionKind::Variance => {
            let m = mean(&mut x.iter().copied());
            mean(&mut x.iter().map(|v| (v - m) * (v - m)))
        }
        FunctionKind::Regression => {
            let p = &inputs.pairs;
            let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
            let my = p.iter().map(|q| q.1).sum::<f64>() / n;
            let sxy: f64 = p.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = p.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
            sxy / sxx
        }
        FunctionKind::Max => spec.dequantize(*codes.iter().max().expect("n >= 1")),
        FunctionKind::Min => spec.dequantize(*codes.iter().min().expect("n >= 1")),
        FunctionKind::Percentile => {
            codes.sort_unstable();
            let r = bitagg::target_rank(cfg.request.quantile, codes.len() as u64);
            spec.dequantize(codes[r as usize - 1])
        }
    })
}

impl Point<'_> {
    fn session_plan(&self) -> Plan {
        Plan {
            m1: self.m1,
            m2: self.m2,
            ..self.plan
        }
    }

    fn trial(&self, t: usize) -> Result<TrialOutcome> {
        let cfg = self.cfg;
        let rng = self.base.derive(Purpose::Trial, t as u64);
        let inputs = trial_inputs(cfg, self.n, &rng);
        let fleet = Fleet::draw(
            self.n as usize,
            &cfg.channel,
            self.link,
            &rng.derive(Purpose::Channel, 0),
        )?;
        let proto = rng.derive(Purpose::Request, 0);
        let truth = oracle(cfg, &inputs)?;

        let (computed, repetitions, trace) = match cfg.function.linear() {
            Some(function) => {
                let mut req = AggregateRequest::new(function, self.spec, self.session_plan());
                req.options = AggregateOptions {
                    log_floor: cfg.request.log_floor,
                    weighted: WeightedOptions {
                        normalize: cfg.request.normalize,
                    },
                    divisor: cfg.request.divisor,
                    regression: Some(RegressionRanges::unit(cfg.full_scale)),
                };
                if function == AggregateFunction::Count {
                    req.predicate = Some(cfg.predicate());
                }
                if function == AggregateFunction::WeightedAvg {
                    req.weights = Some(inputs.weights.clone());
                }
                let input = if function == AggregateFunction::Regression {
                    AggregateInput::Pairs(&inputs.pairs)
                } else {
                    AggregateInput::Values(&inputs.values)
                };
                let out = linagg::aggregate(&req, input, &fleet, &proto)?;
                let reps = (out.diagnostics.requests * out.diagnostics.repetitions) as u64;
                (out.value.primary(), reps, out.trace)
            }
            None => {
                let mut or = OrChannel::new(&fleet, cfg.detection.detection());
                or.pilot_samples = cfg.detection.pilot_samples;
                let codes: Vec<u32> = inputs.values.iter().map(|&v| self.spec.quantize(v).code).collect();
                match cfg.function {
                    FunctionKind::Max | FunctionKind::Min => {
                        let tr = if cfg.function == FunctionKind::Max {
                            bitagg::compute_max(&codes, cfg.bits, &or, &proto)?
                        } else {
                            bitagg::compute_min(&codes, cfg.bits, &or, &proto)?
                        };
                        (
                            self.spec.dequantize(tr.resolved_value),
                            tr.rounds.len() as u64,
                            Vec::new(),
                        )
                    }
                    _ => {
                        let session = AirSession::new(&fleet, self.m1 as usize, self.m2 as usize, cfg.full_scale)?;
                        let out = bitagg::compute_percentile(
                            &inputs.values,
                            cfg.request.quantile,
                            &self.spec,
                            &or,
                            &session,
                            cfg.request.prior,
                            &proto,
                        )?;
                        let rounds = (out.min.rounds.len() + out.max.rounds.len()) as u64;
                        let counts = 1 + out.state.rounds() as u64;
                        (out.value, rounds + counts * self.m1, Vec::new())
                    }
                }
            }
        };

        let abs_error = (computed - truth).abs();
        let depth_errors: Vec<f64> = trace.iter().map(|v| v - truth).collect();
        let first_exact_depth = depth_errors
            .iter()
            .position(|e| error_code(e.abs(), self.lsb, cfg.bits) == 0)
            .map(|d| d + 1);
        Ok(TrialOutcome {
            trial: t,
            true_value: truth,
            computed_value: computed,
            abs_error,
            bit_correct: error_bits(abs_error, self.lsb, cfg.bits),
            repetitions_used: repetitions,
            first_exact_depth,
            depth_errors,
        })
    }

    fn gains(&self) -> (f64, f64) {
        let cfg = self.cfg;
        let n = self.n as f64;
        let md = self.plan.m_d as f64;
        let round = cfg.detection.round_cost();
        match cfg.function {
            FunctionKind::Max | FunctionKind::Min => {
                let g = planner::max_gain(self.n, cfg.bits, self.plan.m_d, round);
                (g, g)
            }
            FunctionKind::Percentile => {
                // Two bitwise sweeps, the total count and at most b interval counts.
                let samples = 2.0 * f64::from(cfg.bits) * round.samples() as f64
                    + f64::from(1 + cfg.bits) * (self.m1 + self.m2) as f64;
                let g = n * md / samples;
                (g, g)
            }
            _ => {
                let requests = match cfg.function {
                    FunctionKind::Variance => 2.0,
                    FunctionKind::Regression => 4.0,
                    FunctionKind::Mean if cfg.request.divisor == linagg::MeanDivisor::Counted => 2.0,
                    _ => 1.0,
                };
                (
                    n * md / (requests * (self.m1 + self.m2) as f64),
                    self.plan.gain / requests,
                )
            }
        }
    }

    fn summary(&self, trials: &[TrialOutcome]) -> Summary {
        let cfg = self.cfg;
        let (gain_analytic, gain_continuous) = self.gains();
        let bitwise = cfg.function.gain_function() == GainFunction::Max;
        Summary {
            n: self.n,
            snr_db: self.snr_db,
            bits: cfg.bits,
            function: cfg.function,
            m1: if bitwise { u64::from(cfg.bits) } else { self.m1 },
            m2: if bitwise {
                cfg.detection.pilot_samples as u64
            } else {
                self.m2
            },
            m_d: self.plan.m_d,
            gain_analytic,
            gain_continuous,
            rms_error: rms(trials.iter().map(|t| t.abs_error)),
            lsb: self.lsb,
            trials: trials.len(),
            seed: cfg.seed,
        }
    }

    fn depth_stats(&self, trials: &[TrialOutcome]) -> Vec<DepthStat> {
        let bits = self.cfg.bits;
        let depth = trials.iter().map(|t| t.depth_errors.len()).min().unwrap_or(0);
        (0..depth)
            .map(|d| {
                let mut bit_correct = vec![0; bits as usize];
                let mut exact = 0;
                for t in trials {
                    let e = t.depth_errors[d].abs();
                    for (k, ok) in error_bits(e, self.lsb, bits).into_iter().enumerate() {
                        bit_correct[k] += usize::from(ok);
                    }
                    exact += usize::from(error_code(e, self.lsb, bits) == 0);
                }
                DepthStat {
                    depth: d + 1,
                    bit_correct,
                    exact,
                    rms_error: rms(trials.iter().map(|t| t.depth_errors[d])),
                }
            })
            .collect()
    }
}

/// Root mean square, accumulated in trial order.
pub fn rms(errors: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for e in errors {
        s += e * e;
        k += 1;
    }
    if k == 0 {
        0.0
    } else {
        (s / k as f64).sqrt()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

fn run_point_in(cfg: &ScenarioConfig, n: u64, snr_db: f64, pool: &rayon::ThreadPool) -> Result<RunRecord> {
    let p = point(cfg, n, snr_db)?;
    let trials = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| p.trial(t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(RunRecord {
        summary: p.summary(&trials),
        depth: p.depth_stats(&trials),
        plan: p.plan,
        trials,
    })
}

/// Monte Carlo at one `(N, SNR)` point.
pub fn run_point(cfg: &ScenarioConfig, n: u64, snr_db: f64) -> Result<RunRecord> {
    cfg.validate()?;
    run_point_in(cfg, n, snr_db, &pool(cfg.workers)?)
}

/// Runs a single-scenario config: the first `n_sensors` and `snr_db` values.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunRecord> {
    cfg.validate()?;
    run_point(cfg, cfg.ns()?[0], cfg.snrs()?[0])
}

/// One analytical gain row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub n: u64,
    pub snr_db: f64,
    pub bits: u32,
    pub function: GainFunction,
    pub m1: u64,
    pub m2: u64,
    pub m_d: u64,
    pub gain: f64,
    pub gain_integer: f64,
}

/// Analytical gain over the config grid, `N` outermost.
pub fn gain_table(cfg: &ScenarioConfig) -> Result<Vec<GainRow>> {
    cfg.validate()?;
    let function = cfg.function.gain_function();
    let m_d = cfg.baseline.m_d();
    let mut rows = Vec::new();
    for n in cfg.ns()? {
        for snr_db in cfg.snrs()? {
            let plan = planner::optimal_plan_with_md(n, snr_db, cfg.bits, m_d)?;
            rows.push(match function {
                GainFunction::Sum => GainRow {
                    n,
                    snr_db,
                    bits: cfg.bits,
                    function,
                    m1: plan.m1,
                    m2: plan.m2,
                    m_d,
                    gain: plan.gain,
                    gain_integer: plan.gain_integer,
                },
                GainFunction::Max => {
                    let g = planner::max_gain(n, cfg.bits, m_d, cfg.detection.round_cost());
                    GainRow {
                        n,
                        snr_db,
                        bits: cfg.bits,
                        function,
                        m1: u64::from(cfg.bits),
                        m2: cfg.detection.pilot_samples as u64,
                        m_d,
                        gain: g,
                        gain_integer: g,
                    }
                }
            });
        }
    }
    Ok(rows)
}

/// Every `(N, SNR)` point of the grid, `N` outermost, plus the gain table.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<(Vec<RunRecord>, Vec<GainRow>)> {
    cfg.validate()?;
    let pool = pool(cfg.workers)?;
    let mut records = Vec::new();
    for n in cfg.ns()? {
        for snr_db in cfg.snrs()? {
            records.push(run_point_in(cfg, n, snr_db, &pool)?);
        }
    }
    Ok((records, gain_table(cfg)?))
}
