use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bitagg::SearchPrior;
use crate::channel::ChannelModelConfig;
use crate::error::{Error, Result};
use crate::linagg::{AggregateFunction, MeanDivisor, Predicate};
use crate::phy::DetectionConfig;
use crate::planner::{BaselineModel, GainFunction, RoundCost};

/// Largest fleet a scenario may ask for.
pub const MAX_SENSORS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec<T> {
    pub start: T,
    pub stop: T,
    pub step: T,
}

/// A scalar, an explicit list, or an inclusive `{start, stop, step}` range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Axis<T> {
    One(T),
    List(Vec<T>),
    Range(RangeSpec<T>),
}

impl Axis<u64> {
    pub fn values(&self, field: &str) -> Result<Vec<u64>> {
        let v = match self {
            Axis::One(x) => vec![*x],
            Axis::List(xs) => xs.clone(),
            Axis::Range(r) => {
                if r.step == 0 || r.stop < r.start {
                    return Err(Error::config(field, "range needs step > 0 and stop >= start"));
                }
                (r.start..=r.stop).step_by(r.step as usize).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::config(field, "must not be empty"));
        }
        Ok(v)
    }
}

impl Axis<f64> {
    pub fn values(&self, field: &str) -> Result<Vec<f64>> {
        let v = match self {
            Axis::One(x) => vec![*x],
            Axis::List(xs) => xs.clone(),
            Axis::Range(r) => {
                if !(r.step > 0.0) || !(r.stop >= r.start) {
                    return Err(Error::config(field, "range needs step > 0 and stop >= start"));
                }
                let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize + 1;
                (0..count).map(|k| r.start + k as f64 * r.step).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::config(field, "must not be empty"));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::config(field, format!("{bad} is not finite")));
        }
        Ok(v)
    }
}

/// Every aggregate the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    #[default]
    Sum,
    Mean,
    GeometricMean,
    WeightedAvg,
    Count,
    Variance,
    Regression,
    Max,
    Min,
    Percentile,
}

impl FunctionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FunctionKind::Sum => "sum",
            FunctionKind::Mean => "mean",
            FunctionKind::GeometricMean => "geometric_mean",
            FunctionKind::WeightedAvg => "weighted_avg",
            FunctionKind::Count => "count",
            FunctionKind::Variance => "variance",
            FunctionKind::Regression => "regression",
            FunctionKind::Max => "max",
            FunctionKind::Min => "min",
            FunctionKind::Percentile => "percentile",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FunctionKind::Sum,
            FunctionKind::Mean,
            FunctionKind::GeometricMean,
            FunctionKind::WeightedAvg,
            FunctionKind::Count,
            FunctionKind::Variance,
            FunctionKind::Regression,
            FunctionKind::Max,
            FunctionKind::Min,
            FunctionKind::Percentile,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
    }

    /// The linear protocol behind this kind, if any.
    pub fn linear(&self) -> Option<AggregateFunction> {
        Some(match self {
            FunctionKind::Sum => AggregateFunction::Sum,
            FunctionKind::Mean => AggregateFunction::Mean,
            FunctionKind::GeometricMean => AggregateFunction::GeometricMean,
            FunctionKind::WeightedAvg => AggregateFunction::WeightedAvg,
            FunctionKind::Count => AggregateFunction::Count,
            FunctionKind::Variance => AggregateFunction::Variance,
            FunctionKind::Regression => AggregateFunction::Regression,
            _ => return None,
        })
    }

    pub fn gain_function(&self) -> GainFunction {
        match self.linear() {
            Some(_) => GainFunction::Sum,
            None => GainFunction::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSettings {
    pub slot_samples: usize,
    pub false_alarm_target: f64,
    pub tone_amplitude: f64,
    pub pilot_samples: usize,
    pub request_overhead_samples: u64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        let d = DetectionConfig::default();
        Self {
            slot_samples: d.slot_samples,
            false_alarm_target: d.false_alarm_target,
            tone_amplitude: d.tone_amplitude,
            pilot_samples: 4,
            request_overhead_samples: 0,
        }
    }
}

impl DetectionSettings {
    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig {
            slot_samples: self.slot_samples,
            false_alarm_target: self.false_alarm_target,
            tone_amplitude: self.tone_amplitude,
        }
    }

    pub fn round_cost(&self) -> RoundCost {
        RoundCost {
            slot_samples: self.slot_samples as u64,
            request_overhead_samples: self.request_overhead_samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSettings {
    pub bits_per_measurement: u32,
    pub link_rate: f64,
    pub bandwidth: f64,
    /// Overrides the derived samples-per-measurement.
    pub md: Option<u64>,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        let b = BaselineModel::default();
        Self {
            bits_per_measurement: b.bits_per_measurement,
            link_rate: b.link_rate,
            bandwidth: b.bandwidth,
            md: None,
        }
    }
}

impl BaselineSettings {
    pub fn model(&self) -> BaselineModel {
        BaselineModel {
            bits_per_measurement: self.bits_per_measurement,
            link_rate: self.link_rate,
            bandwidth: self.bandwidth,
        }
    }

    pub fn m_d(&self) -> u64 {
        self.md.unwrap_or_else(|| self.model().samples_per_measurement())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RequestSettings {
    /// Joint repetitions; defaults to the plan.
    pub m1: Option<u64>,
    /// Pilot samples; defaults to the plan.
    pub m2: Option<u64>,
    /// Count predicate; defaults to `x > full_scale / 2`.
    pub predicate: Option<Predicate>,
    pub quantile: f64,
    pub prior: SearchPrior,
    pub log_floor: f64,
    pub normalize: bool,
    pub divisor: MeanDivisor,
}

impl Default for RequestSettings {
    fn default() -> Self {
        Self {
            m1: None,
            m2: None,
            predicate: None,
            quantile: 0.5,
            prior: SearchPrior::None,
            log_floor: 1e-2,
            normalize: true,
            divisor: MeanDivisor::Configured,
        }
    }
}

fn default_n() -> Axis<u64> {
    Axis::One(50)
}

fn default_snr() -> Axis<f64> {
    Axis::One(10.0)
}

fn default_bits() -> u32 {
    8
}

fn default_trials() -> usize {
    500
}

fn default_seed() -> u64 {
    1
}

fn default_full_scale() -> f64 {
    1.0
}

/// Everything one `run`, `sweep` or `figure` invocation needs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_n")]
    pub n_sensors: Axis<u64>,
    #[serde(default = "default_snr")]
    pub snr_db: Axis<f64>,
    #[serde(default = "default_bits")]
    pub bits: u32,
    #[serde(default)]
    pub function: FunctionKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_full_scale")]
    pub full_scale: f64,
    /// Zero receiver noise.
    #[serde(default)]
    pub noiseless: bool,
    /// Worker threads; 0 picks the number of CPUs.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub channel: ChannelModelConfig,
    #[serde(default)]
    pub detection: DetectionSettings,
    #[serde(default)]
    pub baseline: BaselineSettings,
    #[serde(default)]
    pub request: RequestSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn ns(&self) -> Result<Vec<u64>> {
        self.n_sensors.values("n_sensors")
    }

    pub fn snrs(&self) -> Result<Vec<f64>> {
        self.snr_db.values("snr_db")
    }

    pub fn validate(&self) -> Result<()> {
        let ns = self.ns()?;
        if let Some(bad) = ns.iter().find(|&&n| n == 0 || n > MAX_SENSORS) {
            return Err(Error::config("n_sensors", format!("{bad} outside [1, {MAX_SENSORS}]")));
        }
        self.snrs()?;
        if !(1..=16).contains(&self.bits) {
            return Err(Error::config("bits", format!("must be in [1, 16], got {}", self.bits)));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if !(self.full_scale > 0.0) || !self.full_scale.is_finite() {
            return Err(Error::config("full_scale", "must be positive"));
        }
        self.channel.validate()?;
        self.detection.detection().validate()?;
        if self.detection.pilot_samples == 0 {
            return Err(Error::config("detection.pilot_samples", "must be >= 1"));
        }
        self.baseline.model().validate()?;
        if self.baseline.md == Some(0) {
            return Err(Error::config("baseline.md", "must be >= 1"));
        }
        let r = &self.request;
        if r.m1 == Some(0) {
            return Err(Error::config("request.m1", "must be >= 1"));
        }
        if r.m2 == Some(0) {
            return Err(Error::config("request.m2", "must be >= 1"));
        }
        if !(r.quantile > 0.0 && r.quantile < 1.0) {
            return Err(Error::config("request.quantile", "must be in (0, 1)"));
        }
        if !(r.log_floor > 0.0 && r.log_floor < self.full_scale) {
            return Err(Error::config("request.log_floor", "must be in (0, full_scale)"));
        }
        if self.function == FunctionKind::Count {
            let max_n = ns.iter().copied().max().unwrap_or(1);
            let needed = u64::BITS - max_n.leading_zeros();
            if self.bits < needed {
                return Err(Error::config(
                    "bits",
                    format!("counting up to {max_n} sensors needs at least {needed} bits"),
                ));
            }
        }
        Ok(())
    }

    /// Count predicate in effect.
    pub fn predicate(&self) -> Predicate {
        self.request.predicate.unwrap_or(Predicate::Above {
            threshold: self.full_scale / 2.0,
        })
    }
}
