//! Per-sensor channels, reciprocity calibration and receiver noise.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexSample, Purpose, SeededRng};

/// Transmit power and receiver noise for one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    tx_power: f64,
    noise_power: f64,
}

impl LinkBudget {
    /// `noise_power = 0` is allowed and models a noiseless receiver.
    pub fn new(tx_power: f64, noise_power: f64) -> Result<Self> {
        if !(tx_power > 0.0) || !tx_power.is_finite() {
            return Err(Error::domain(format!("tx_power must be positive, got {tx_power}")));
        }
        if !(noise_power >= 0.0) || !noise_power.is_finite() {
            return Err(Error::domain(format!("noise_power must be >= 0, got {noise_power}")));
        }
        Ok(Self { tx_power, noise_power })
    }

    /// Budget whose channel SNR is `snr_db` for the given transmit power.
    pub fn from_snr_db(tx_power: f64, snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::domain(format!("snr_db must be finite, got {snr_db}")));
        }
        Self::new(tx_power, tx_power / crate::model::undb(snr_db))
    }

    pub fn noiseless(tx_power: f64) -> Result<Self> {
        Self::new(tx_power, 0.0)
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// `P / σ²`; infinite for a noiseless receiver.
    pub fn channel_snr(&self) -> f64 {
        self.tx_power / self.noise_power
    }
}

/// Forward channel `h` (sensor to cluster-head), reverse channel `g`
/// (cluster-head to sensor) and the hardware calibration factor `K` with
/// `h = K·g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub forward: ComplexSample,
    pub reverse: ComplexSample,
    pub calibration: ComplexSample,
}

impl ChannelRealization {
    /// Builds a realization from the reverse channel and calibration factor;
    /// the forward channel is `K·g`.
    pub fn from_reverse(reverse: ComplexSample, calibration: ComplexSample) -> Self {
        Self {
            forward: calibration * reverse,
            reverse,
            calibration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// `|h| = 1`, phase uniform on `[0, 2π)`.
    #[default]
    UnitModulusPhase,
    /// Unit-power Rayleigh magnitude clipped below at the magnitude floor.
    RayleighClipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModelConfig {
    pub kind: ChannelKind,
    pub magnitude_floor: f64,
    /// Standard deviation (radians) of the per-transmission phase error.
    pub phase_drift_std: f64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        Self {
            kind: ChannelKind::UnitModulusPhase,
            magnitude_floor: 0.1,
            phase_drift_std: 0.0,
        }
    }
}

impl ChannelModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.magnitude_floor) {
            return Err(Error::config(
                "channel.magnitude_floor",
                format!("must be in [0, 1), got {}", self.magnitude_floor),
            ));
        }
        if !(self.phase_drift_std >= 0.0) || !self.phase_drift_std.is_finite() {
            return Err(Error::config(
                "channel.phase_drift_std",
                format!("must be >= 0, got {}", self.phase_drift_std),
            ));
        }
        Ok(())
    }
}

/// Draws `n` independent channels. Sensor `i` always uses the child stream
/// `(Channel, i)`, so its channel does not depend on `n`.
pub fn draw_channels(n: usize, cfg: &ChannelModelConfig, rng: &SeededRng) -> Result<Vec<ChannelRealization>> {
    if n == 0 {
        return Err(Error::domain("draw_channels needs at least one sensor"));
    }
    cfg.validate()?;
    // Margin so that |K·g| stays above the floor after rounding.
    let floor = cfg.magnitude_floor * (1.0 + 1e-12);
    Ok((0..n)
        .map(|i| {
            let mut r = rng.derive(Purpose::Channel, i as u64);
            let magnitude = match cfg.kind {
                ChannelKind::UnitModulusPhase => 1.0,
                ChannelKind::RayleighClipped => {
                    let re: f64 = r.sample(StandardNormal);
                    let im: f64 = r.sample(StandardNormal);
                    (0.5 * (re * re + im * im)).sqrt().max(floor)
                }
            };
            let phase = r.random_range(0.0..TAU);
            let k_phase = r.random_range(0.0..TAU);
            let calibration = Complex64::from_polar(1.0, k_phase);
            let forward = Complex64::from_polar(magnitude, phase);
            let reverse = forward / calibration;
            // h = K·g is recomputed so reciprocity holds bit-for-bit.
            ChannelRealization::from_reverse(reverse, calibration)
        })
        .collect())
}

/// Calibration factor `K = h0 / g0`.
pub fn calibrate(h0: ComplexSample, g0: ComplexSample) -> Result<ComplexSample> {
    if g0.norm_sqr() == 0.0 || !g0.is_finite() {
        return Err(Error::DegenerateChannel(format!(
            "reverse channel {g0} cannot be inverted"
        )));
    }
    Ok(h0 / g0)
}

/// Circularly-symmetric complex Gaussian with total power `noise_power`.
pub fn complex_gaussian<R: Rng + ?Sized>(noise_power: f64, rng: &mut R) -> ComplexSample {
    if noise_power == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let scale = (noise_power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(scale * re, scale * im)
}

/// `x + w` with `w ~ CN(0, noise_power)`.
pub fn add_noise<R: Rng + ?Sized>(x: ComplexSample, noise_power: f64, rng: &mut R) -> ComplexSample {
    x + complex_gaussian(noise_power, rng)
}

/// Random rotation `e^{iφ}` with `φ ~ N(0, std²)`; exactly 1 when `std == 0`.
pub fn phase_error<R: Rng + ?Sized>(std: f64, rng: &mut R) -> ComplexSample {
    if std == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let phi: f64 = StandardNormal.sample(rng);
    Complex64::from_polar(1.0, (std * phi) % (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ChannelModelConfig {
        ChannelModelConfig::default()
    }

    #[test]
    fn unit_modulus_single_sensor() {
        let ch = draw_channels(1, &unit(), &SeededRng::new(1, 0)).unwrap();
        assert_eq!(ch.len(), 1);
        assert!((ch[0].forward.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_sensors_is_an_error() {
        assert!(matches!(
            draw_channels(0, &unit(), &SeededRng::new(1, 0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rayleigh_respects_floor() {
        let cfg = ChannelModelConfig {
            kind: ChannelKind::RayleighClipped,
            magnitude_floor: 0.1,
            phase_drift_std: 0.0,
        };
        let ch = draw_channels(1000, &cfg, &SeededRng::new(2, 0)).unwrap();
        assert!(ch.iter().all(|c| c.forward.norm() >= 0.1));
        // Some draws must actually hit the floor for the test to mean anything.
        assert!(ch.iter().any(|c| c.forward.norm() < 0.1 * (1.0 + 1e-9)));
    }

    #[test]
    fn uniform_phases_average_out() {
        // |mean| of 10^4 unit phasors has std ~ 1/sqrt(2·10^4) per axis.
        let ch = draw_channels(10_000, &unit(), &SeededRng::new(3, 0)).unwrap();
        let mean = ch.iter().map(|c| c.forward).sum::<Complex64>() / 10_000.0;
        assert!(mean.norm() < 0.05, "{mean}");
    }

    #[test]
    fn reciprocity_is_exact() {
        let ch = draw_channels(500, &unit(), &SeededRng::new(4, 0)).unwrap();
        for c in &ch {
            assert_eq!(c.forward, c.calibration * c.reverse);
            assert!((c.calibration.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn static_channels_repeat_and_ignore_fleet_size() {
        let a = draw_channels(10, &unit(), &SeededRng::new(5, 9)).unwrap();
        let b = draw_channels(20, &unit(), &SeededRng::new(5, 9)).unwrap();
        assert_eq!(a[..], b[..10]);
    }

    #[test]
    fn calibrate_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(calibrate(one, one).unwrap(), one);
        assert_eq!(
            calibrate(Complex64::new(0.0, 2.0), one).unwrap(),
            Complex64::new(0.0, 2.0)
        );
        assert!(matches!(
            calibrate(one, Complex64::new(0.0, 0.0)),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn calibrate_phase_difference() {
        let mut rng = SeededRng::new(6, 0);
        for _ in 0..100 {
            let t1: f64 = rng.random_range(0.0..TAU);
            let t2: f64 = rng.random_range(0.0..TAU);
            let k = calibrate(Complex64::from_polar(1.0, t1), Complex64::from_polar(1.0, t2)).unwrap();
            let expected = Complex64::from_polar(1.0, t1 - t2);
            assert!((k - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_add_is_identity() {
        let x = Complex64::new(0.3, -1.2);
        assert_eq!(add_noise(x, 0.0, &mut SeededRng::new(0, 0)), x);
    }

    #[test]
    fn noise_power_and_independence() {
        let mut rng = SeededRng::new(8, 0);
        let n = 100_000;
        let w: Vec<Complex64> = (0..n)
            .map(|_| add_noise(Complex64::new(0.0, 0.0), 1.0, &mut rng))
            .collect();
        let power = w.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((0.97..=1.03).contains(&power), "power {power}");
        let mre = w.iter().map(|z| z.re).sum::<f64>() / n as f64;
        let mim = w.iter().map(|z| z.im).sum::<f64>() / n as f64;
        let cov = w.iter().map(|z| (z.re - mre) * (z.im - mim)).sum::<f64>() / n as f64;
        let vre = w.iter().map(|z| (z.re - mre).powi(2)).sum::<f64>() / n as f64;
        let vim = w.iter().map(|z| (z.im - mim).powi(2)).sum::<f64>() / n as f64;
        let rho = cov / (vre * vim).sqrt();
        assert!(rho.abs() < 0.02, "rho {rho}");
    }

    #[test]
    fn link_budget_snr() {
        let lb = LinkBudget::from_snr_db(2.0, 10.0).unwrap();
        assert!((lb.channel_snr() - 10.0).abs() < 1e-12);
        assert_eq!(lb.channel_snr(), lb.tx_power() / lb.noise_power());
        assert!(LinkBudget::new(0.0, 1.0).is_err());
        assert!(LinkBudget::noiseless(1.0).unwrap().channel_snr().is_infinite());
    }
}
