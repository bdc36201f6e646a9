//! Per-resonator spectroscopic parameters and the ordered cascade.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::spin::SpinEnsembleSpec;

/// Default spin-line center for resonator `index`: `Δ·(n − sgn(n)/2)`.
///
/// For a four-resonator comb with Δ = 1 this places the lines at ±0.5 and ±1.5.
pub fn default_spin_center(index: i32, comb_spacing: f64) -> f64 {
    let n = f64::from(index);
    comb_spacing * (n - n.signum() / 2.0)
}

/// One ring resonator and the spin ensemble it contains.
///
/// Rates are in units of the comb spacing. `position` is the optical delay
/// `z/c` of the coupling point in units of `1/Δ`; it only contributes phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub index: i32,
    /// Waveguide coupling rate κₙ.
    pub kappa: f64,
    /// Cavity detuning Δₙ.
    pub cavity_detuning: f64,
    /// Intrinsic amplitude decay γₙ; enters as Δₙ′ = Δₙ − iγₙ.
    pub gamma: f64,
    /// Collective coupling √Nₙ·gₙ.
    pub g_collective: f64,
    /// Lorentzian half width at half maximum δₙ = 1/T₂*.
    pub spin_linewidth: f64,
    /// Center Δ̃ₙ of the spin line.
    pub spin_center: f64,
    pub position: f64,
}

impl ResonatorSpec {
    /// Lossless resonator with the default spin center and zero position.
    pub fn new(
        index: i32,
        kappa: f64,
        cavity_detuning: f64,
        g_collective: f64,
        spin_linewidth: f64,
        comb_spacing: f64,
    ) -> Self {
        Self {
            index,
            kappa,
            cavity_detuning,
            gamma: 0.0,
            g_collective,
            spin_linewidth,
            spin_center: default_spin_center(index, comb_spacing),
            position: 0.0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_spin_center(mut self, spin_center: f64) -> Self {
        self.spin_center = spin_center;
        self
    }

    pub fn with_position(mut self, position: f64) -> Self {
        self.position = position;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.index == 0 {
            return Err(Error::ZeroIndex);
        }
        check_finite(self.kappa, "kappa")?;
        check_finite(self.cavity_detuning, "cavity_detuning")?;
        check_finite(self.gamma, "gamma")?;
        check_finite(self.g_collective, "g_collective")?;
        check_finite(self.spin_linewidth, "spin_linewidth")?;
        check_finite(self.spin_center, "spin_center")?;
        check_finite(self.position, "position")?;
        let bad = |name: &str, value: f64, reason| Error::InvalidParameter {
            name: format!("resonator[{}].{}", self.index, name),
            value,
            reason,
        };
        if self.kappa <= 0.0 {
            return Err(bad("kappa", self.kappa, "must be > 0"));
        }
        if self.gamma < 0.0 {
            return Err(bad("gamma", self.gamma, "must be >= 0"));
        }
        if self.g_collective < 0.0 {
            return Err(bad("g_collective", self.g_collective, "must be >= 0"));
        }
        if self.spin_linewidth <= 0.0 {
            return Err(bad("spin_linewidth", self.spin_linewidth, "must be > 0"));
        }
        Ok(())
    }

    /// Partner at `-index`: same κ, g, γ, δ; negated Δ and Δ̃. Position is kept.
    pub fn mirrored(&self) -> Self {
        Self {
            index: -self.index,
            cavity_detuning: -self.cavity_detuning,
            spin_center: -self.spin_center,
            ..*self
        }
    }

    pub fn spin_ensemble(&self) -> SpinEnsembleSpec {
        SpinEnsembleSpec {
            center: self.spin_center,
            linewidth: self.spin_linewidth,
            g_collective: self.g_collective,
        }
    }
}

/// Ordered cascade of resonators along the common waveguide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    resonators: Vec<ResonatorSpec>,
    comb_spacing: f64,
    central_frequency: f64,
    symmetric: bool,
}

impl SystemConfig {
    /// Cascade in the given order, without a symmetry constraint.
    pub fn new(resonators: Vec<ResonatorSpec>, comb_spacing: f64, central_frequency: f64) -> Result<Self> {
        let cfg = Self {
            resonators,
            comb_spacing,
            central_frequency,
            symmetric: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a symmetric cascade from one resonator per `±n` pair.
    ///
    /// The result is sorted by index, so `[n=1, n=2]` becomes `[-2, -1, 1, 2]`.
    pub fn mirrored(half: Vec<ResonatorSpec>, comb_spacing: f64, central_frequency: f64) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &half {
            if !seen.insert(r.index.abs()) {
                return Err(Error::DuplicateIndex(r.index));
            }
        }
        let mut resonators: Vec<_> = half.iter().flat_map(|r| [*r, r.mirrored()]).collect();
        resonators.sort_by_key(|r| r.index);
        let cfg = Self {
            resonators,
            comb_spacing,
            central_frequency,
            symmetric: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resonators.is_empty() {
            return Err(Error::EmptyCascade);
        }
        check_finite(self.comb_spacing, "comb_spacing")?;
        check_finite(self.central_frequency, "central_frequency")?;
        if self.comb_spacing <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "comb_spacing".into(),
                value: self.comb_spacing,
                reason: "must be > 0",
            });
        }
        let mut seen = BTreeSet::new();
        for r in &self.resonators {
            r.validate()?;
            if !seen.insert(r.index) {
                return Err(Error::DuplicateIndex(r.index));
            }
        }
        if self.symmetric {
            for r in &self.resonators {
                let partner = self
                    .resonator(-r.index)
                    .ok_or(Error::UnpairedIndex(r.index))?;
                check_mirror(r, partner)?;
            }
        }
        Ok(())
    }

    pub fn resonators(&self) -> &[ResonatorSpec] {
        &self.resonators
    }

    pub fn resonator(&self, index: i32) -> Option<&ResonatorSpec> {
        self.resonators.iter().find(|r| r.index == index)
    }

    pub fn len(&self) -> usize {
        self.resonators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resonators.is_empty()
    }

    pub fn comb_spacing(&self) -> f64 {
        self.comb_spacing
    }

    pub fn central_frequency(&self) -> f64 {
        self.central_frequency
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Number of `±n` pairs, i.e. half the cascade length rounded up.
    pub fn half_count(&self) -> usize {
        self.resonators.len().div_ceil(2)
    }

    /// Reference coupling κ₁: the `n = 1` resonator, or the first in the cascade.
    pub fn reference_kappa(&self) -> f64 {
        self.resonator(1).unwrap_or(&self.resonators[0]).kappa
    }

    /// Replaces the resonator list, keeping the global fields and the symmetry flag.
    pub fn with_resonators(&self, resonators: Vec<ResonatorSpec>) -> Result<Self> {
        let cfg = Self {
            resonators,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same cascade with every γₙ set to `gamma`.
    pub fn with_uniform_gamma(&self, gamma: f64) -> Result<Self> {
        self.with_resonators(self.resonators.iter().map(|r| r.with_gamma(gamma)).collect())
    }

    /// Drops the symmetry flag; parameters are unchanged.
    pub fn into_unconstrained(mut self) -> Self {
        self.symmetric = false;
        self
    }

    pub(crate) fn with_symmetric_flag(mut self, symmetric: bool) -> Result<Self> {
        self.symmetric = symmetric;
        self.validate()?;
        Ok(self)
    }

    /// Positive-index half of a symmetric cascade.
    pub fn positive_half(&self) -> Vec<ResonatorSpec> {
        self.resonators.iter().filter(|r| r.index > 0).copied().collect()
    }
}

fn check_mirror(r: &ResonatorSpec, p: &ResonatorSpec) -> Result<()> {
    let mismatch = |field| Error::AsymmetricPair {
        index: r.index,
        partner: p.index,
        field,
    };
    if r.kappa != p.kappa {
        return Err(mismatch("kappa"));
    }
    if r.gamma != p.gamma {
        return Err(mismatch("gamma"));
    }
    if r.g_collective != p.g_collective {
        return Err(mismatch("g_collective"));
    }
    if r.spin_linewidth != p.spin_linewidth {
        return Err(mismatch("spin_linewidth"));
    }
    if r.cavity_detuning != -p.cavity_detuning {
        return Err(mismatch("cavity_detuning"));
    }
    if r.spin_center != -p.spin_center {
        return Err(mismatch("spin_center"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_centers_of_four_resonator_comb() {
        let centers: Vec<_> = [-2, -1, 1, 2].iter().map(|&n| default_spin_center(n, 1.0)).collect();
        assert_eq!(centers, vec![-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(default_spin_center(3, 2.0), 5.0);
    }

    #[test]
    fn mirrored_cascade_is_sorted_and_antisymmetric() {
        let half = vec![
            ResonatorSpec::new(1, 3.27, 0.48, 1.78, 1.8, 1.0),
            ResonatorSpec::new(2, 2.03, 1.13, 1.49, 1.8, 1.0),
        ];
        let cfg = SystemConfig::mirrored(half, 1.0, 0.0).unwrap();
        let idx: Vec<_> = cfg.resonators().iter().map(|r| r.index).collect();
        assert_eq!(idx, vec![-2, -1, 1, 2]);
        let m = cfg.resonator(-1).unwrap();
        assert_eq!(m.cavity_detuning, -0.48);
        assert_eq!(m.spin_center, -0.5);
        assert_eq!(m.kappa, 3.27);
        assert!(cfg.symmetric());
        assert_eq!(cfg.half_count(), 2);
    }

    #[test]
    fn rejects_invalid_resonators() {
        let ok = ResonatorSpec::new(1, 1.0, 0.0, 1.0, 1.0, 1.0);
        assert_eq!(ResonatorSpec { index: 0, ..ok }.validate(), Err(Error::ZeroIndex));
        assert!(matches!(
            ResonatorSpec { kappa: 0.0, ..ok }.validate(),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(ResonatorSpec { gamma: -1e-3, ..ok }.validate().is_err());
        assert!(ResonatorSpec { g_collective: -1.0, ..ok }.validate().is_err());
        assert!(ResonatorSpec { spin_linewidth: 0.0, ..ok }.validate().is_err());
        assert_eq!(
            ResonatorSpec { kappa: f64::NAN, ..ok }.validate(),
            Err(Error::NonFinite("kappa"))
        );
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let r = ResonatorSpec::new(1, 1.0, 0.0, 1.0, 1.0, 1.0);
        assert_eq!(SystemConfig::new(vec![], 1.0, 0.0), Err(Error::EmptyCascade));
        assert_eq!(SystemConfig::new(vec![r, r], 1.0, 0.0), Err(Error::DuplicateIndex(1)));
        assert_eq!(
            SystemConfig::mirrored(vec![r, r.mirrored()], 1.0, 0.0),
            Err(Error::DuplicateIndex(-1))
        );
        assert!(SystemConfig::new(vec![r], 0.0, 0.0).is_err());
    }

    #[test]
    fn symmetric_flag_requires_mirrored_partners() {
        let r = ResonatorSpec::new(1, 1.0, 0.3, 1.0, 1.0, 1.0);
        let cfg = SystemConfig::new(vec![r], 1.0, 0.0).unwrap();
        assert_eq!(cfg.clone().with_symmetric_flag(true), Err(Error::UnpairedIndex(1)));
        let wrong = ResonatorSpec { cavity_detuning: 0.3, ..r.mirrored() };
        let cfg = SystemConfig::new(vec![wrong, r], 1.0, 0.0).unwrap();
        assert!(matches!(
            cfg.with_symmetric_flag(true),
            Err(Error::AsymmetricPair { field: "cavity_detuning", .. })
        ));
    }
}
