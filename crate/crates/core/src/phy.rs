//! The three over-the-air primitives: pilot channel estimation, coherent
//! joint transmission with channel compensation, and energy detection.

use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::channel::{self, ChannelModelConfig, ChannelRealization, LinkBudget};
use crate::error::{Error, Result};
use crate::model::{ComplexSample, Purpose, SeededRng};

/// A cluster: its sensors' channels and the shared link budget.
#[derive(Debug, Clone)]
pub struct Fleet {
    pub channels: Vec<ChannelRealization>,
    pub link: LinkBudget,
    pub phase_drift_std: f64,
}

impl Fleet {
    pub fn draw(n: usize, cfg: &ChannelModelConfig, link: LinkBudget, rng: &SeededRng) -> Result<Self> {
        Ok(Self {
            channels: channel::draw_channels(n, cfg, rng)?,
            link,
            phase_drift_std: cfg.phase_drift_std,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn noise_power(&self) -> f64 {
        self.link.noise_power()
    }

    /// Pilot amplitude `√P`: the cluster-head transmits at the same average
    /// power as a sensor.
    pub fn pilot(&self, m2: usize) -> Result<PilotRequest> {
        PilotRequest::new(m2, Complex64::new(self.link.tx_power().sqrt(), 0.0))
    }

    /// Every sensor estimates its channel from one request packet. Sensor `i`
    /// draws its pilot noise from stream `(Pilot, i)` of `rng`.
    pub fn estimate_all(&self, m2: usize, rng: &SeededRng) -> Result<Vec<ChannelEstimate>> {
        let req = self.pilot(m2)?;
        Ok(self
            .channels
            .iter()
            .enumerate()
            .map(|(i, ch)| {
                let mut r = rng.derive(Purpose::Pilot, i as u64);
                estimate_channel(ch, &req, self.noise_power(), &mut r)
            })
            .collect())
    }
}

/// Request packet carrying `m2` identical pilot samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotRequest {
    m2: usize,
    pilot_value: ComplexSample,
}

impl PilotRequest {
    pub fn new(m2: usize, pilot_value: ComplexSample) -> Result<Self> {
        if m2 == 0 {
            return Err(Error::domain("pilot request needs m2 >= 1"));
        }
        if pilot_value.norm_sqr() == 0.0 || !pilot_value.is_finite() {
            return Err(Error::domain("pilot value must be finite and non-zero"));
        }
        Ok(Self { m2, pilot_value })
    }

    pub fn unit(m2: usize) -> Result<Self> {
        Self::new(m2, Complex64::new(1.0, 0.0))
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn pilot_value(&self) -> ComplexSample {
        self.pilot_value
    }
}

/// A sensor's view of its channels after one request packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    /// `ĝ`, averaged from the pilots.
    pub reverse: ComplexSample,
    /// `ĥ = K·ĝ`, used for compensation.
    pub forward: ComplexSample,
}

/// Averages `m2` noisy pilot observations into `ĝ` and maps it through the
/// calibration factor. Error power is `σ²/(m2·|pilot|²)`.
pub fn estimate_channel(
    channel: &ChannelRealization,
    req: &PilotRequest,
    noise_power: f64,
    rng: &mut SeededRng,
) -> ChannelEstimate {
    let reverse = if noise_power == 0.0 {
        channel.reverse
    } else {
        let p = req.pilot_value;
        let clean = channel.reverse * p;
        let acc: Complex64 = (0..req.m2).map(|_| channel::add_noise(clean, noise_power, rng)).sum();
        acc / req.m2 as f64 / p
    };
    ChannelEstimate {
        reverse,
        forward: channel.calibration * reverse,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTxConfig {
    pub m1: usize,
    pub participants: Vec<usize>,
}

impl JointTxConfig {
    pub fn new(m1: usize, participants: Vec<usize>) -> Result<Self> {
        if m1 == 0 {
            return Err(Error::domain("joint transmission needs m1 >= 1"));
        }
        Ok(Self { m1, participants })
    }

    pub fn all(m1: usize, n: usize) -> Result<Self> {
        Self::new(m1, (0..n).collect())
    }
}

/// What the cluster-head saw over the `m1` repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointReception {
    /// Real part of the averaged reception.
    pub value: f64,
    /// Complex average of all repetitions.
    pub average: ComplexSample,
    /// Per-repetition received samples, in order.
    pub samples: Vec<ComplexSample>,
}

impl JointReception {
    /// Imaginary leakage of the average; zero for perfect compensation.
    pub fn imag_residual(&self) -> f64 {
        self.average.im
    }

    /// Real part of the running average after each repetition.
    pub fn running_means(&self) -> Vec<f64> {
        let mut mean = Complex64::new(0.0, 0.0);
        self.samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                mean += (*s - mean) / (k + 1) as f64;
                mean.re
            })
            .collect()
    }
}

/// Coherent joint transmission. Each participant sends `x_i / ĥ_i`; each
/// repetition receives `Σ h_i·x_i/ĥ_i + w` and the cluster-head averages.
///
/// Channels are fixed across repetitions; receiver noise is drawn fresh for
/// each one from `(ReceiverNoise, 0)` and phase drift from `(PhaseDrift, i)`.
pub fn joint_transmit(
    values: &[f64],
    estimates: &[ChannelEstimate],
    fleet: &Fleet,
    cfg: &JointTxConfig,
    rng: &SeededRng,
) -> Result<JointReception> {
    let n = fleet.len();
    if values.len() != n || estimates.len() != n {
        return Err(Error::domain(format!(
            "joint_transmit: {} values and {} estimates for {} sensors",
            values.len(),
            estimates.len(),
            n
        )));
    }
    if cfg.m1 == 0 {
        return Err(Error::domain("joint transmission needs m1 >= 1"));
    }
    // Effective gain h_i/ĥ_i for each participant; exactly 1 with perfect estimates.
    let mut gains = Vec::with_capacity(cfg.participants.len());
    for &i in &cfg.participants {
        if i >= n {
            return Err(Error::domain(format!("participant {i} outside fleet of {n}")));
        }
        let est = estimates[i].forward;
        if est.norm_sqr() == 0.0 || !est.is_finite() {
            return Err(Error::DegenerateEstimate { sensor: i });
        }
        gains.push((i, fleet.channels[i].forward / est));
    }

    let mut noise = rng.derive(Purpose::ReceiverNoise, 0);
    let mut drift: Vec<SeededRng> = if fleet.phase_drift_std > 0.0 {
        gains
            .iter()
            .map(|&(i, _)| rng.derive(Purpose::PhaseDrift, i as u64))
            .collect()
    } else {
        Vec::new()
    };

    let mut samples = Vec::with_capacity(cfg.m1);
    let mut mean = Complex64::new(0.0, 0.0);
    for k in 0..cfg.m1 {
        let mut rx = Complex64::new(0.0, 0.0);
        for (j, &(i, gain)) in gains.iter().enumerate() {
            let g = if drift.is_empty() {
                gain
            } else {
                gain * channel::phase_error(fleet.phase_drift_std, &mut drift[j])
            };
            rx += g * values[i];
        }
        rx = channel::add_noise(rx, fleet.noise_power(), &mut noise);
        // Incremental mean keeps a constant sequence exact.
        mean += (rx - mean) / (k + 1) as f64;
        samples.push(rx);
    }
    Ok(JointReception {
        value: mean.re,
        average: mean,
        samples,
    })
}

/// Energy detector parameters for one OR-channel slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub slot_samples: usize,
    pub false_alarm_target: f64,
    /// Amplitude of the tone an active sensor sends (full transmit scale).
    pub tone_amplitude: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            slot_samples: 4,
            false_alarm_target: 1e-3,
            tone_amplitude: 1.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slot_samples == 0 {
            return Err(Error::config("detection.slot_samples", "must be >= 1"));
        }
        if !(self.false_alarm_target > 0.0 && self.false_alarm_target < 0.5) {
            return Err(Error::config(
                "detection.false_alarm_target",
                format!("must be in (0, 0.5), got {}", self.false_alarm_target),
            ));
        }
        if !(self.tone_amplitude > 0.0) || !self.tone_amplitude.is_finite() {
            return Err(Error::config("detection.tone_amplitude", "must be positive"));
        }
        Ok(())
    }

    /// Threshold on `(1/S)·Σ|r|²`. Under noise alone `2S/σ²` times the
    /// statistic is chi-square with `2S` degrees of freedom.
    pub fn threshold(&self, noise_power: f64) -> Result<f64> {
        self.validate()?;
        if noise_power == 0.0 {
            return Ok(0.0);
        }
        let dof = 2.0 * self.slot_samples as f64;
        let chi = ChiSquared::new(dof).map_err(|e| Error::domain(e.to_string()))?;
        let q = chi.inverse_cdf(1.0 - self.false_alarm_target);
        Ok(q * noise_power / dof)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub statistic: f64,
    pub threshold: f64,
    pub detected: bool,
}

/// One OR-channel slot. Active sensors send a phase-aligned tone without
/// amplitude compensation; the cluster-head compares received energy with
/// the chi-square threshold.
pub fn detect_energy(
    transmitting: &[usize],
    estimates: &[ChannelEstimate],
    fleet: &Fleet,
    cfg: &DetectionConfig,
    rng: &mut SeededRng,
) -> Result<Detection> {
    let threshold = cfg.threshold(fleet.noise_power())?;
    let mut clean = Complex64::new(0.0, 0.0);
    for &i in transmitting {
        let ch = fleet
            .channels
            .get(i)
            .ok_or_else(|| Error::domain(format!("transmitter {i} outside fleet of {}", fleet.len())))?;
        let est = estimates[i].forward;
        let align = if est.norm_sqr() > 0.0 {
            est.conj() / est.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        clean += ch.forward * align * cfg.tone_amplitude;
    }
    let energy: f64 = (0..cfg.slot_samples)
        .map(|_| channel::add_noise(clean, fleet.noise_power(), rng).norm_sqr())
        .sum();
    let statistic = energy / cfg.slot_samples as f64;
    Ok(Detection {
        statistic,
        threshold,
        detected: statistic > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;

    fn fleet(n: usize, noise: f64, seed: u64) -> Fleet {
        Fleet::draw(
            n,
            &ChannelModelConfig::default(),
            LinkBudget::new(1.0, noise).unwrap(),
            &SeededRng::new(seed, 0),
        )
        .unwrap()
    }

    fn perfect(f: &Fleet) -> Vec<ChannelEstimate> {
        f.estimate_all(1, &SeededRng::new(0, 0)).unwrap()
    }

    #[test]
    fn noiseless_estimate_is_exact() {
        let f = fleet(3, 0.0, 1);
        let req = PilotRequest::unit(5).unwrap();
        for ch in &f.channels {
            let est = estimate_channel(ch, &req, 0.0, &mut SeededRng::new(1, 1));
            assert_eq!(est.reverse, ch.reverse);
            assert_eq!(est.forward, ch.forward);
        }
    }

    fn estimation_mse(m2: usize, trials: usize, seed: u64) -> f64 {
        let ch = ChannelRealization::from_reverse(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        let req = PilotRequest::unit(m2).unwrap();
        let mut rng = SeededRng::new(seed, 0);
        (0..trials)
            .map(|_| (estimate_channel(&ch, &req, 1.0, &mut rng).reverse - ch.reverse).norm_sqr())
            .sum::<f64>()
            / trials as f64
    }

    #[test]
    fn estimation_error_power_is_sigma2_over_m2() {
        let mse = estimation_mse(100, 10_000, 3);
        assert!((0.0094..=0.0106).contains(&mse), "mse {mse}");
    }

    #[test]
    fn doubling_m2_halves_error() {
        let a = estimation_mse(50, 20_000, 4);
        let b = estimation_mse(100, 20_000, 5);
        let ratio = a / b;
        assert!((ratio - 2.0).abs() / 2.0 < 0.05, "ratio {ratio}");
    }

    #[test]
    fn noiseless_sum_of_three() {
        let f = fleet(3, 0.0, 2);
        let cfg = JointTxConfig::all(1, 3).unwrap();
        let rx = joint_transmit(&[1.0, 2.0, 3.0], &perfect(&f), &f, &cfg, &SeededRng::new(0, 0)).unwrap();
        assert_eq!(rx.value, 6.0);
        assert_eq!(rx.imag_residual(), 0.0);
    }

    #[test]
    fn constant_average_over_repetitions() {
        let f = fleet(1, 0.0, 3);
        let cfg = JointTxConfig::all(7, 1).unwrap();
        let rx = joint_transmit(&[0.5], &perfect(&f), &f, &cfg, &SeededRng::new(0, 0)).unwrap();
        assert_eq!(rx.value, 0.5);
        assert_eq!(rx.samples.len(), 7);
        assert!(rx.running_means().iter().all(|&m| m == 0.5));
    }

    #[test]
    fn coherent_power_is_n_squared_p() {
        let n = 100;
        let p: f64 = 0.7;
        let f = fleet(n, 0.0, 4);
        let cfg = JointTxConfig::all(1, n).unwrap();
        let values = vec![p.sqrt(); n];
        let rx = joint_transmit(&values, &perfect(&f), &f, &cfg, &SeededRng::new(0, 0)).unwrap();
        let power = rx.samples[0].norm_sqr();
        assert!((power - (n * n) as f64 * p).abs() / ((n * n) as f64 * p) < 1e-12);
    }

    #[test]
    fn non_participants_stay_silent() {
        let f = fleet(4, 0.0, 5);
        let cfg = JointTxConfig::new(1, vec![1, 3]).unwrap();
        let rx = joint_transmit(&[10.0, 1.0, 20.0, 2.0], &perfect(&f), &f, &cfg, &SeededRng::new(0, 0)).unwrap();
        assert!((rx.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_estimate_names_sensor() {
        let f = fleet(3, 0.0, 6);
        let mut est = perfect(&f);
        est[2].forward = Complex64::new(0.0, 0.0);
        let cfg = JointTxConfig::all(1, 3).unwrap();
        let err = joint_transmit(&[1.0, 1.0, 1.0], &est, &f, &cfg, &SeededRng::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateEstimate { sensor: 2 }));
    }

    #[test]
    fn rayleigh_noiseless_cancels() {
        let cfg = ChannelModelConfig {
            kind: ChannelKind::RayleighClipped,
            ..Default::default()
        };
        let f = Fleet::draw(1000, &cfg, LinkBudget::noiseless(1.0).unwrap(), &SeededRng::new(7, 0)).unwrap();
        let values: Vec<f64> = (0..1000).map(|i| (i % 17) as f64 / 16.0).collect();
        let rx = joint_transmit(
            &values,
            &perfect(&f),
            &f,
            &JointTxConfig::all(3, 1000).unwrap(),
            &SeededRng::new(0, 0),
        )
        .unwrap();
        let truth: f64 = values.iter().sum();
        assert!((rx.value - truth).abs() / truth < 1e-9);
    }

    #[test]
    fn threshold_matches_chi_square_quantile() {
        // scipy.stats.chi2.ppf(0.999, 8) / 8
        let t = DetectionConfig::default().threshold(1.0).unwrap();
        assert!((t - 3.2655601947970174).abs() < 1e-6, "{t}");
        assert_eq!(DetectionConfig::default().threshold(0.0).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_detection() {
        let f = fleet(3, 0.0, 8);
        let est = perfect(&f);
        let cfg = DetectionConfig::default();
        let mut rng = SeededRng::new(0, 0);
        assert!(!detect_energy(&[], &est, &f, &cfg, &mut rng).unwrap().detected);
        assert!(detect_energy(&[1], &est, &f, &cfg, &mut rng).unwrap().detected);
    }

    #[test]
    fn false_alarms_near_target() {
        let f = fleet(1, 1.0, 9);
        let est = perfect(&f);
        let cfg = DetectionConfig::default();
        let mut rng = SeededRng::new(10, 0);
        let trials = 200_000;
        let alarms = (0..trials)
            .filter(|_| detect_energy(&[], &est, &f, &cfg, &mut rng).unwrap().detected)
            .count();
        let rate = alarms as f64 / trials as f64;
        assert!(rate <= 2e-3, "rate {rate}");
        assert!(rate >= 0.5e-3, "rate {rate}");
    }

    #[test]
    fn detection_config_validation() {
        let bad = DetectionConfig {
            false_alarm_target: 0.6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectionConfig {
            slot_samples: 0,
            ..Default::default()
        };
        assert!(bad.threshold(1.0).is_err());
    }
}
