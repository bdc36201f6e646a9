//! Time-domain oracle: direct integration of the cascade equations of motion
//! with discretized spin ensembles, and an FFT linear-response reference.

mod integrate;
mod propagate;
mod pulse;

pub use integrate::{
    energy_ledger, integrate, EnergyLedger, IntegrationSettings, Scheme, SimulationResult, MAX_DURATION,
    RING_DOWN_FRACTION, STEP_LIMIT,
};
pub use propagate::{frequency_propagate, relative_l2_error};
pub use pulse::{PulseShape, PulseSpec, DEFAULT_DELAY_WIDTHS};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::resonator::SystemConfig;
use crate::spin::{discretize, DiscreteEnsemble, DEFAULT_TRUNCATION};

/// Spin discretization plus integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub spins_per_ensemble: usize,
    pub truncation: f64,
    pub integration: IntegrationSettings,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            spins_per_ensemble: 4001,
            truncation: DEFAULT_TRUNCATION,
            integration: IntegrationSettings::default(),
        }
    }
}

/// Discretizes every ensemble of `cfg` with the same count and truncation.
pub fn discretize_all(cfg: &SystemConfig, count: usize, truncation: f64) -> Result<Vec<DiscreteEnsemble>> {
    cfg.resonators()
        .iter()
        .map(|r| discretize(&r.spin_ensemble(), count, truncation))
        .collect()
}

/// Discretizes the ensembles and integrates.
pub fn simulate(cfg: &SystemConfig, pulse: &PulseSpec, settings: &SimulationSettings) -> Result<SimulationResult> {
    let ensembles = discretize_all(cfg, settings.spins_per_ensemble, settings.truncation)?;
    integrate(cfg, &ensembles, pulse, &settings.integration)
}

/// Composite Simpson rule on uniform samples; an odd interval count closes
/// with the 3/8 rule, and two samples fall back to the trapezoid.
pub(crate) fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (y[0] + y[1]),
        3 => h / 3.0 * (y[0] + 4.0 * y[1] + y[2]),
        _ => {
            let intervals = n - 1;
            let simpson_end = if intervals.is_multiple_of(2) { n - 1 } else { n - 4 };
            let mut s = y[0] + y[simpson_end];
            for (k, v) in y.iter().enumerate().take(simpson_end).skip(1) {
                s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = s * h / 3.0;
            if simpson_end != n - 1 {
                let t = &y[n - 4..];
                total += 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3]);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::simpson;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [3usize, 4, 5, 6, 11, 12] {
            let h = 2.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n).map(|k| (k as f64 * h).powi(3) - k as f64 * h).collect();
            assert!((simpson(&y, h) - 2.0).abs() < 1e-13, "n = {n}");
        }
        assert_eq!(simpson(&[1.0, 3.0], 0.5), 1.0);
        assert_eq!(simpson(&[1.0], 0.5), 0.0);
    }
}
