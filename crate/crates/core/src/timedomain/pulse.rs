use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    #[default]
    Gaussian,
}

/// Input pulse `A·exp(−(t−t₀)²/(4σ²))·e^{−iω_c t}`; `σ` is the RMS width of
/// the intensity `|a(t)|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    #[serde(default)]
    pub shape: PulseShape,
    #[serde(default)]
    pub center_frequency: f64,
    pub duration: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    /// Peak time; `None` places the peak at `8σ`.
    #[serde(default)]
    pub delay: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

/// Peak offset (in RMS widths) used when no delay is given.
pub const DEFAULT_DELAY_WIDTHS: f64 = 8.0;

impl PulseSpec {
    pub fn gaussian(duration: f64, center_frequency: f64) -> Self {
        Self {
            shape: PulseShape::Gaussian,
            center_frequency,
            duration,
            amplitude: 1.0,
            delay: None,
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Self { amplitude, ..self }
    }

    pub fn with_delay(self, delay: f64) -> Self {
        Self {
            delay: Some(delay),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.duration, "pulse.duration")?;
        check_finite(self.amplitude, "pulse.amplitude")?;
        check_finite(self.center_frequency, "pulse.center_frequency")?;
        if self.duration <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "pulse.duration".into(),
                value: self.duration,
                reason: "must be > 0",
            });
        }
        if let Some(d) = self.delay {
            check_finite(d, "pulse.delay")?;
        }
        Ok(())
    }

    pub fn peak_time(&self) -> f64 {
        self.delay.unwrap_or(DEFAULT_DELAY_WIDTHS * self.duration)
    }

    pub fn at(&self, t: f64) -> Complex64 {
        let x = t - self.peak_time();
        let envelope = self.amplitude * (-x * x / (4.0 * self.duration * self.duration)).exp();
        Complex64::from_polar(envelope, -self.center_frequency * t)
    }

    /// `∫|a|²dt = A²σ√(2π)`.
    pub fn energy(&self) -> f64 {
        self.amplitude * self.amplitude * self.duration * (2.0 * PI).sqrt()
    }

    /// RMS width of `|a(ω)|²`.
    pub fn spectral_width(&self) -> f64 {
        0.5 / self.duration
    }

    /// Time after which the remaining intensity is below `e^{−32}` of the peak.
    pub fn end_time(&self) -> f64 {
        self.peak_time() + DEFAULT_DELAY_WIDTHS * self.duration
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_rms_width_and_energy() {
        let p = PulseSpec::gaussian(2.0, 0.0).with_amplitude(1.5);
        let h = 1e-3;
        let (mut e, mut m2) = (0.0, 0.0);
        for k in 0..=40_000 {
            let t = k as f64 * h;
            let i = p.at(t).norm_sqr();
            e += i * h;
            m2 += i * (t - p.peak_time()).powi(2) * h;
        }
        assert!((e / p.energy() - 1.0).abs() < 1e-9);
        assert!(((m2 / e).sqrt() - 2.0).abs() < 1e-9);
        assert_eq!(p.peak_time(), 16.0);
    }

    #[test]
    fn carrier_sign_follows_field_convention() {
        let p = PulseSpec::gaussian(1.0, 0.3).with_delay(0.0);
        let a = p.at(1.0);
        assert!((a.arg() + 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(PulseSpec::gaussian(0.0, 0.0).validate().is_err());
        assert!(PulseSpec::gaussian(f64::NAN, 0.0).validate().is_err());
        assert!(PulseSpec::gaussian(1.0, 0.0).validate().is_ok());
    }
}
