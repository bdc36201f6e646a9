//! Inhomogeneously broadened spin ensembles: Lorentzian line shape and its
//! deterministic discretization into finite spin sets.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Minimum tail truncation, in linewidths, accepted by [`discretize`].
pub const MIN_TRUNCATION: f64 = 10.0;
pub const DEFAULT_TRUNCATION: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsembleSpec {
    /// Line center Δ̃ₙ.
    pub center: f64,
    /// Lorentzian HWHM δₙ.
    pub linewidth: f64,
    /// Collective coupling √Nₙ·gₙ.
    pub g_collective: f64,
}

impl SpinEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        check_finite(self.center, "center")?;
        check_finite(self.linewidth, "linewidth")?;
        check_finite(self.g_collective, "g_collective")?;
        if self.linewidth <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "linewidth".into(),
                value: self.linewidth,
                reason: "must be > 0",
            });
        }
        if self.g_collective < 0.0 {
            return Err(Error::InvalidParameter {
                name: "g_collective".into(),
                value: self.g_collective,
                reason: "must be >= 0",
            });
        }
        Ok(())
    }

    /// Continuum susceptibility `G²/(δ − i(ω − Δ̃))`.
    pub fn response(&self, omega: f64) -> Complex64 {
        self.g_collective * self.g_collective / Complex64::new(self.linewidth, -(omega - self.center))
    }
}

/// `π⁻¹·w/(δ² + w²)`.
pub fn lorentzian_density(delta: f64, linewidth: f64) -> Result<f64> {
    check_finite(delta, "delta")?;
    check_finite(linewidth, "linewidth")?;
    if linewidth <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "linewidth".into(),
            value: linewidth,
            reason: "must be > 0",
        });
    }
    Ok(linewidth / (PI * (delta * delta + linewidth * linewidth)))
}

/// `Nₙgₙ²T₂*`, i.e. `G²/δ`.
pub fn absorption_coefficient(spec: &SpinEnsembleSpec) -> f64 {
    spec.g_collective * spec.g_collective / spec.linewidth
}

/// Finite spin set standing in for one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteEnsemble {
    /// Offsets δⱼ from the line center.
    pub detunings: Vec<f64>,
    /// Per-spin couplings gⱼ.
    pub couplings: Vec<f64>,
}

impl DiscreteEnsemble {
    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    /// `√(Σⱼ gⱼ²)`.
    pub fn collective_coupling(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// `Σⱼ gⱼ²/(ε − i(ω − Δ̃ − δⱼ))`; approaches the continuum response with
    /// linewidth `δ + ε` as the spin count grows.
    pub fn response(&self, omega: f64, center: f64, regularizer: f64) -> Complex64 {
        self.detunings
            .iter()
            .zip(&self.couplings)
            .map(|(d, g)| g * g / Complex64::new(regularizer, -(omega - center - d)))
            .sum()
    }
}

/// Places `count` spins at equal-mass quantiles of the Lorentzian truncated to
/// `±truncation_width·linewidth`, each with coupling `G/√count`.
///
/// Odd counts give a grid symmetric about the center; even counts are accepted
/// with a warning.
pub fn discretize(spec: &SpinEnsembleSpec, count: usize, truncation_width: f64) -> Result<DiscreteEnsemble> {
    spec.validate()?;
    check_finite(truncation_width, "truncation_width")?;
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count".into(),
            value: 0.0,
            reason: "need at least one spin",
        });
    }
    if truncation_width < MIN_TRUNCATION {
        return Err(Error::InvalidParameter {
            name: "truncation_width".into(),
            value: truncation_width,
            reason: "must be >= 10 linewidths",
        });
    }
    if count.is_multiple_of(2) {
        log::warn!("even spin count {count} gives a grid without a spin at the line center");
    }
    // CDF of the truncated line: u ∈ (−F, F), δ = w·tan(πu), F = atan(W)/π.
    let half_mass = truncation_width.atan() / PI;
    let m = count as f64;
    let mut detunings: Vec<f64> = (0..count)
        .map(|j| {
            let u = -half_mass + (j as f64 + 0.5) * 2.0 * half_mass / m;
            spec.linewidth * (PI * u).tan()
        })
        .collect();
    // Exact mirror symmetry; rounding in tan() would otherwise break it.
    for j in 0..count / 2 {
        let k = count - 1 - j;
        let mag = 0.5 * (detunings[k] - detunings[j]);
        detunings[j] = -mag;
        detunings[k] = mag;
    }
    if count % 2 == 1 {
        detunings[count / 2] = 0.0;
    }
    let g = spec.g_collective / m.sqrt();
    let mut couplings = vec![g; count];
    let total: f64 = couplings.iter().map(|c| c * c).sum();
    if total > 0.0 {
        let scale = spec.g_collective / total.sqrt();
        couplings.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(DiscreteEnsemble { detunings, couplings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(linewidth: f64, g: f64) -> SpinEnsembleSpec {
        SpinEnsembleSpec {
            center: 0.5,
            linewidth,
            g_collective: g,
        }
    }

    #[test]
    fn lorentzian_peak_and_half_width() {
        let peak = lorentzian_density(0.0, 1.0).unwrap();
        assert!((peak - 1.0 / PI).abs() < 1e-15);
        assert!((lorentzian_density(2.5, 2.5).unwrap() - lorentzian_density(0.0, 2.5).unwrap() / 2.0).abs() < 1e-15);
        assert!(lorentzian_density(0.0, 0.0).is_err());
        assert!(lorentzian_density(0.0, -1.0).is_err());
    }

    #[test]
    fn lorentzian_truncated_mass() {
        // Composite Simpson on [-50, 50]; reference 0.977091581 from adaptive quadrature.
        let n = 200_000;
        let h = 100.0 / n as f64;
        let mut sum = 0.0;
        for k in 0..=n {
            let x = -50.0 + k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * lorentzian_density(x, 1.8).unwrap();
        }
        let mass = sum * h / 3.0;
        assert!((mass - 0.9771).abs() < 1e-3);
        assert!((mass - 0.977_091_581_213_794).abs() < 1e-9);
    }

    #[test]
    fn single_spin_sits_at_center() {
        let e = discretize(&spec(1.8, 1.78), 1, 1e3).unwrap();
        assert_eq!(e.detunings, vec![0.0]);
        assert!((e.couplings[0] - 1.78).abs() < 1e-15);
    }

    #[test]
    fn three_spins_at_sixth_quantiles() {
        // q solves CDF_trunc(q) = 5/6 with CDF = (atan(q)/atan(1000) + 1)/2.
        let e = discretize(&spec(1.0, 1.0), 3, 1e3).unwrap();
        let q = 1.729_387_217_044_88;
        assert_eq!(e.detunings[1], 0.0);
        assert!((e.detunings[2] - q).abs() < 1e-12);
        assert!((e.detunings[0] + q).abs() < 1e-12);
    }

    #[test]
    fn collective_coupling_is_preserved() {
        for &m in &[1, 2, 7, 400, 4001] {
            let e = discretize(&spec(1.8, 1.49), m, 1e3).unwrap();
            let s: f64 = e.couplings.iter().map(|g| g * g).sum();
            assert!((s / (1.49 * 1.49) - 1.0).abs() < 1e-12, "count {m}");
        }
    }

    #[test]
    fn odd_grids_are_symmetric_and_sorted() {
        let e = discretize(&spec(1.8, 1.0), 101, 50.0).unwrap();
        for j in 0..e.len() {
            assert_eq!(e.detunings[j], -e.detunings[e.len() - 1 - j]);
        }
        assert!(e.detunings.windows(2).all(|w| w[0] < w[1]));
        assert!(e.detunings[100] <= 1.8 * 50.0);
    }

    #[test]
    fn rejects_bad_discretization_requests() {
        assert!(discretize(&spec(1.0, 1.0), 0, 1e3).is_err());
        assert!(discretize(&spec(1.0, 1.0), 11, 9.0).is_err());
        assert!(discretize(&spec(0.0, 1.0), 11, 1e3).is_err());
        assert!(discretize(&spec(1.0, 1.0), 4, 1e3).is_ok());
    }

    #[test]
    fn absorption_coefficients_of_reference_ensembles() {
        let a1 = absorption_coefficient(&spec(1.8, 1.78));
        let a2 = absorption_coefficient(&spec(1.8, 1.49));
        assert!((a1 - 1.76).abs() < 0.01, "{a1}");
        assert!((a2 - 1.23).abs() < 0.01, "{a2}");
        assert_eq!(absorption_coefficient(&spec(1.8, 0.0)), 0.0);
    }

    #[test]
    fn discrete_response_converges_monotonically() {
        let s = spec(1.8, 1.78);
        let eps = 0.05;
        let broadened = SpinEnsembleSpec {
            linewidth: s.linewidth + eps,
            ..s
        };
        let grid: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
        let errors: Vec<f64> = [101, 401, 1601]
            .iter()
            .map(|&m| {
                let e = discretize(&s, m, 1e3).unwrap();
                grid.iter()
                    .map(|&w| (e.response(w, s.center, eps) - broadened.response(w)).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
        assert!(errors[2] < 0.02 * s.g_collective.powi(2) / s.linewidth);
    }
}
