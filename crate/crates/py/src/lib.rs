//! Python bindings: planner, fleets, the aggregate protocols and the
//! scenario runner.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aircomp_core::bitagg::{self, OrChannel, SearchPrior};
use aircomp_core::channel::{ChannelKind, ChannelModelConfig, LinkBudget};
use aircomp_core::harness::{self, ScenarioConfig};
use aircomp_core::linagg::{
    self, AggregateValue, AirSession, MeanDivisor, Predicate, RegressionRanges, WeightedOptions,
};
use aircomp_core::phy::{DetectionConfig, Fleet};
use aircomp_core::planner::{self, BaselineModel, GainFunction, RoundCost};
use aircomp_core::{Error, QuantizationSpec, SeededRng};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Csv { .. } => PyOSError::new_err(e.to_string()),
        Error::Config { .. } | Error::Domain(_) | Error::NonPositiveValue { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyfunction]
fn db(x: f64) -> PyResult<f64> {
    aircomp_core::db(x).map_err(py_err)
}

#[pyfunction]
fn undb(d: f64) -> f64 {
    aircomp_core::undb(d)
}

/// Cheapest repetition counts for a `bits`-bit sum.
#[pyclass(name = "Plan", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyPlan {
    n: u64,
    snr_db: f64,
    bits: u32,
    required_snr_db: f64,
    l: f64,
    m1_continuous: f64,
    m2_continuous: f64,
    m1: u64,
    m2: u64,
    m_d: u64,
    snr_eff_db: f64,
    snr_eff_integer_db: f64,
    gain: f64,
    gain_integer: f64,
    feasible: bool,
    impractical: bool,
}

#[pymethods]
impl PyPlan {
    #[new]
    #[pyo3(signature = (n, snr_db, bits, md=None))]
    fn new(n: u64, snr_db: f64, bits: u32, md: Option<u64>) -> PyResult<Self> {
        let md = md.unwrap_or_else(|| BaselineModel::default().samples_per_measurement());
        let p = planner::optimal_plan_with_md(n, snr_db, bits, md).map_err(py_err)?;
        Ok(Self {
            n: p.n,
            snr_db: p.snr_db,
            bits: p.bits,
            required_snr_db: p.required_snr_db,
            l: p.l,
            m1_continuous: p.m1_continuous,
            m2_continuous: p.m2_continuous,
            m1: p.m1,
            m2: p.m2,
            m_d: p.m_d,
            snr_eff_db: p.snr_eff_db,
            snr_eff_integer_db: p.snr_eff_integer_db,
            gain: p.gain,
            gain_integer: p.gain_integer,
            feasible: p.feasible,
            impractical: p.impractical,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan(n={}, snr_db={}, bits={}, m1={}, m2={}, gain={:.3})",
            self.n, self.snr_db, self.bits, self.m1, self.m2, self.gain
        )
    }
}

#[pyfunction]
#[pyo3(signature = (n, snr_db, bits, md=128))]
fn closed_form_gain(n: u64, snr_db: f64, bits: u32, md: u64) -> f64 {
    planner::closed_form_gain(n, snr_db, bits, md)
}

/// `(n, snr_db, gain, gain_integer)` rows over the grid, `n` outermost.
#[pyfunction]
#[pyo3(signature = (ns, snrs_db, bits, function="sum", slot_samples=4, request_overhead_samples=0))]
fn gain_curve(
    ns: Vec<u64>,
    snrs_db: Vec<f64>,
    bits: u32,
    function: &str,
    slot_samples: u64,
    request_overhead_samples: u64,
) -> PyResult<Vec<(u64, f64, f64, f64)>> {
    let function = match function {
        "sum" => GainFunction::Sum,
        "max" => GainFunction::Max,
        other => return Err(PyValueError::new_err(format!("unknown gain function {other:?}"))),
    };
    let round = RoundCost {
        slot_samples,
        request_overhead_samples,
    };
    let pts = planner::gain_curve(&ns, &snrs_db, bits, &BaselineModel::default(), function, round).map_err(py_err)?;
    Ok(pts.iter().map(|p| (p.n, p.snr_db, p.gain, p.gain_integer)).collect())
}

/// Sensors with their channels and the link budget. `snr_db=None` gives a
/// noiseless link.
#[pyclass(name = "Fleet", frozen)]
struct PyFleet {
    inner: Fleet,
}

#[pymethods]
impl PyFleet {
    #[new]
    #[pyo3(signature = (n, snr_db=None, seed=0, kind="unit_modulus_phase", magnitude_floor=0.1, phase_drift_std=0.0))]
    fn new(
        n: usize,
        snr_db: Option<f64>,
        seed: u64,
        kind: &str,
        magnitude_floor: f64,
        phase_drift_std: f64,
    ) -> PyResult<Self> {
        let kind = match kind {
            "unit_modulus_phase" => ChannelKind::UnitModulusPhase,
            "rayleigh_clipped" => ChannelKind::RayleighClipped,
            other => return Err(PyValueError::new_err(format!("unknown channel kind {other:?}"))),
        };
        let cfg = ChannelModelConfig {
            kind,
            magnitude_floor,
            phase_drift_std,
        };
        let p = harness::READING_POWER;
        let link = match snr_db {
            Some(s) => LinkBudget::from_snr_db(p, s),
            None => LinkBudget::noiseless(p),
        }
        .map_err(py_err)?;
        let inner = Fleet::draw(n, &cfg, link, &SeededRng::new(seed, 0)).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn noise_power(&self) -> f64 {
        self.inner.noise_power()
    }
}

fn line_or_scalar(py: Python<'_>, v: AggregateValue) -> PyResult<Py<PyAny>> {
    Ok(match v {
        AggregateValue::Line { intercept, slope } => (intercept, slope).into_pyobject(py)?.into_any().unbind(),
        AggregateValue::Count(c) => c.into_pyobject(py)?.into_any().unbind(),
        AggregateValue::Scalar(x) => x.into_pyobject(py)?.into_any().unbind(),
    })
}

/// Runs one linear aggregate over the air. `function` is one of sum, mean,
/// geometric_mean, weighted_avg, count, variance, regression. Regression
/// takes `ys` alongside `values` and returns `(intercept, slope)`.
#[pyfunction]
#[pyo3(signature = (fleet, function, values, m1, m2, *, seed=0, full_scale=1.0, weights=None, threshold=None, ys=None, log_floor=0.01, normalize=true, counted_divisor=false))]
#[allow(clippy::too_many_arguments)]
fn aggregate(
    py: Python<'_>,
    fleet: &PyFleet,
    function: &str,
    values: Vec<f64>,
    m1: usize,
    m2: usize,
    seed: u64,
    full_scale: f64,
    weights: Option<Vec<f64>>,
    threshold: Option<f64>,
    ys: Option<Vec<f64>>,
    log_floor: f64,
    normalize: bool,
    counted_divisor: bool,
) -> PyResult<Py<PyAny>> {
    let s = AirSession::new(&fleet.inner, m1, m2, full_scale).map_err(py_err)?;
    let rng = SeededRng::new(seed, 0);
    let need =
        |o: Option<Vec<f64>>, what: &str| o.ok_or_else(|| PyValueError::new_err(format!("{function} needs {what}")));
    let out = match function {
        "sum" => linagg::aggregate_sum(&values, &s, &rng),
        "mean" => {
            let d = if counted_divisor {
                MeanDivisor::Counted
            } else {
                MeanDivisor::Configured
            };
            linagg::aggregate_mean(&values, d, &s, &rng)
        }
        "geometric_mean" => linagg::aggregate_geometric_mean(&values, log_floor, &s, &rng),
        "weighted_avg" => {
            let w = need(weights, "weights")?;
            linagg::aggregate_weighted(&values, &w, WeightedOptions { normalize }, &s, &rng)
        }
        "count" => {
            let p = match threshold {
                Some(t) => Predicate::Above { threshold: t },
                None => Predicate::True,
            };
            linagg::aggregate_count(&values, p, &s, &rng)
        }
        "variance" => linagg::aggregate_variance(&values, &s, &rng),
        "regression" => {
            let ys = need(ys, "ys")?;
            if ys.len() != values.len() {
                return Err(PyValueError::new_err("values and ys differ in length"));
            }
            let pairs: Vec<(f64, f64)> = values.into_iter().zip(ys).collect();
            linagg::aggregate_regression(&pairs, RegressionRanges::unit(full_scale), &s, &rng)
        }
        other => return Err(PyValueError::new_err(format!("unknown function {other:?}"))),
    }
    .map_err(py_err)?;
    line_or_scalar(py, out.value)
}

fn or_channel(fleet: &PyFleet) -> OrChannel<'_> {
    OrChannel::new(&fleet.inner, DetectionConfig::default())
}

/// Largest `bits`-bit code held by the fleet, over the OR-channel.
#[pyfunction]
#[pyo3(signature = (fleet, codes, bits, seed=0))]
fn compute_max(fleet: &PyFleet, codes: Vec<u32>, bits: u32, seed: u64) -> PyResult<u32> {
    bitagg::compute_max(&codes, bits, &or_channel(fleet), &SeededRng::new(seed, 0))
        .map(|t| t.resolved_value)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (fleet, codes, bits, seed=0))]
fn compute_min(fleet: &PyFleet, codes: Vec<u32>, bits: u32, seed: u64) -> PyResult<u32> {
    bitagg::compute_min(&codes, bits, &or_channel(fleet), &SeededRng::new(seed, 0))
        .map(|t| t.resolved_value)
        .map_err(py_err)
}

/// Quantile `q` of readings in `[0, full_scale]`; returns `(value, count_requests)`.
#[pyfunction]
#[pyo3(signature = (fleet, values, q, bits, m1, m2, *, seed=0, full_scale=1.0, prior="none"))]
#[allow(clippy::too_many_arguments)]
fn compute_percentile(
    fleet: &PyFleet,
    values: Vec<f64>,
    q: f64,
    bits: u32,
    m1: usize,
    m2: usize,
    seed: u64,
    full_scale: f64,
    prior: &str,
) -> PyResult<(f64, usize)> {
    let prior = match prior {
        "none" => SearchPrior::None,
        "uniform" => SearchPrior::Uniform,
        other => return Err(PyValueError::new_err(format!("unknown prior {other:?}"))),
    };
    let spec = QuantizationSpec::new(bits, full_scale).map_err(py_err)?;
    let s = AirSession::new(&fleet.inner, m1, m2, full_scale).map_err(py_err)?;
    let out = bitagg::compute_percentile(
        &values,
        q,
        &spec,
        &or_channel(fleet),
        &s,
        prior,
        &SeededRng::new(seed, 0),
    )
    .map_err(py_err)?;
    Ok((out.value, out.state.rounds()))
}

/// Monte Carlo for the first grid point of a TOML scenario config. Returns
/// `{"summary": {...}, "trials": [{...}, ...]}`.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ScenarioConfig::from_toml(config).map_err(py_err)?;
    let rec = py.detach(|| harness::run_scenario(&cfg)).map_err(py_err)?;
    let s = &rec.summary;
    let summary = PyDict::new(py);
    summary.set_item("n", s.n)?;
    summary.set_item("snr_db", s.snr_db)?;
    summary.set_item("bits", s.bits)?;
    summary.set_item("function", s.function.as_str())?;
    summary.set_item("m1", s.m1)?;
    summary.set_item("m2", s.m2)?;
    summary.set_item("m_d", s.m_d)?;
    summary.set_item("gain_analytic", s.gain_analytic)?;
    summary.set_item("gain_continuous", s.gain_continuous)?;
    summary.set_item("rms_error", s.rms_error)?;
    summary.set_item("lsb", s.lsb)?;
    summary.set_item("trials", s.trials)?;
    summary.set_item("seed", s.seed)?;
    let trials = rec
        .trials
        .iter()
        .map(|t| {
            let d = PyDict::new(py);
            d.set_item("trial", t.trial)?;
            d.set_item("true_value", t.true_value)?;
            d.set_item("computed_value", t.computed_value)?;
            d.set_item("abs_error", t.abs_error)?;
            d.set_item("bit_correct", t.bit_correct.clone())?;
            d.set_item("repetitions_used", t.repetitions_used)?;
            d.set_item("first_exact_depth", t.first_exact_depth)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("summary", summary)?;
    out.set_item("trials", trials)?;
    Ok(out)
}

#[pymodule]
fn aircomp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlan>()?;
    m.add_class::<PyFleet>()?;
    m.add_function(wrap_pyfunction!(db, m)?)?;
    m.add_function(wrap_pyfunction!(undb, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_gain, m)?)?;
    m.add_function(wrap_pyfunction!(gain_curve, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_max, m)?)?;
    m.add_function(wrap_pyfunction!(compute_min, m)?)?;
    m.add_function(wrap_pyfunction!(compute_percentile, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
