//! Sampled spectra, band statistics and the loss-sensitivity fit.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::resonator::SystemConfig;
use crate::transfer::{self, cascade_solve};

pub const DEFAULT_GRID_POINTS: usize = 601;
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 2.5;

/// `points` equally spaced samples on `[lo, hi]`, endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    check_finite(lo, "omega_min")?;
    check_finite(hi, "omega_max")?;
    match points {
        0 => Err(Error::EmptyGrid),
        1 => Ok(vec![lo]),
        _ => {
            if hi <= lo {
                return Err(Error::InvalidParameter {
                    name: "omega_max".into(),
                    value: hi,
                    reason: "must exceed omega_min",
                });
            }
            let step = (hi - lo) / (points - 1) as f64;
            Ok((0..points)
                .map(|k| if k == points - 1 { hi } else { lo + step * k as f64 })
                .collect())
        }
    }
}

/// Default spectrum grid: 601 points over `[−2.5Δ, 2.5Δ]`.
pub fn default_grid(comb_spacing: f64) -> Vec<f64> {
    let w = DEFAULT_GRID_HALF_WIDTH * comb_spacing;
    uniform_grid(-w, w, DEFAULT_GRID_POINTS).expect("static grid")
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for (k, w) in grid.iter().enumerate() {
        check_finite(*w, "omega")?;
        if k > 0 && grid[k - 1] >= *w {
            return Err(Error::UnsortedGrid(k));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexSpectrum {
    omega_grid: Vec<f64>,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(omega_grid: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        check_grid(&omega_grid)?;
        if omega_grid.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "grid vs values",
                left: omega_grid.len(),
                right: values.len(),
            });
        }
        Ok(Self { omega_grid, values })
    }

    pub fn sample(cfg: &SystemConfig, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let values = grid
            .iter()
            .map(|&w| transfer::transfer_function(cfg, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            omega_grid: grid.to_vec(),
            values,
        })
    }

    pub fn omega_grid(&self) -> &[f64] {
        &self.omega_grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencySpectrum {
    pub omega_grid: Vec<f64>,
    pub transfer: Vec<Complex64>,
    pub reflected_intensity: Vec<f64>,
    pub eta0: Vec<f64>,
    /// Present when some γₙ > 0.
    pub eta_lossy: Option<Vec<f64>>,
}

impl EfficiencySpectrum {
    pub fn len(&self) -> usize {
        self.omega_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_grid.is_empty()
    }
}

/// Samples S(ω), |S|², η⁰ and (for lossy cascades) η on `grid`.
pub fn evaluate_spectrum(cfg: &SystemConfig, grid: &[f64]) -> Result<EfficiencySpectrum> {
    check_grid(grid)?;
    let lossy = cfg.resonators().iter().any(|r| r.gamma > 0.0);
    let mut transfer = Vec::with_capacity(grid.len());
    let mut reflected = Vec::with_capacity(grid.len());
    let mut eta0 = Vec::with_capacity(grid.len());
    let mut eta_lossy = Vec::with_capacity(if lossy { grid.len() } else { 0 });
    for &w in grid {
        let s = transfer::transfer_function(cfg, w)?;
        let r = s.norm_sqr();
        transfer.push(s);
        reflected.push(r.min(1.0));
        eta0.push((1.0 - r).clamp(0.0, 1.0));
        if lossy {
            let (amps, _) = cascade_solve(cfg, w)?;
            let drained: f64 = cfg
                .resonators()
                .iter()
                .zip(&amps)
                .map(|(res, t)| 2.0 * res.gamma * t.norm_sqr())
                .sum();
            eta_lossy.push((1.0 - r - drained).clamp(0.0, 1.0));
        }
    }
    Ok(EfficiencySpectrum {
        omega_grid: grid.to_vec(),
        transfer,
        reflected_intensity: reflected,
        eta0,
        eta_lossy: lossy.then_some(eta_lossy),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandMetrics {
    pub band: [f64; 2],
    pub threshold: f64,
    pub min_eta0: f64,
    pub mean_eta0: f64,
    pub max_eta0: f64,
    /// Width of the longest contiguous run of samples with η⁰ ≥ threshold.
    pub bandwidth_at_threshold: f64,
    pub samples: usize,
}

/// Statistics of η⁰ over the samples of `spec` lying inside `band`.
pub fn band_metrics(spec: &EfficiencySpectrum, band: [f64; 2], threshold: f64) -> Result<BandMetrics> {
    check_finite(band[0], "band_lo")?;
    check_finite(band[1], "band_hi")?;
    check_finite(threshold, "threshold")?;
    let inside: Vec<(f64, f64)> = spec
        .omega_grid
        .iter()
        .zip(&spec.eta0)
        .filter(|(w, _)| **w >= band[0] && **w <= band[1])
        .map(|(w, e)| (*w, *e))
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let min = inside.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max = inside.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mean = inside.iter().map(|p| p.1).sum::<f64>() / inside.len() as f64;

    let mut best = 0.0f64;
    let mut run_start: Option<f64> = None;
    for &(w, e) in &inside {
        if e >= threshold {
            let start = *run_start.get_or_insert(w);
            best = best.max(w - start);
        } else {
            run_start = None;
        }
    }
    Ok(BandMetrics {
        band,
        threshold,
        min_eta0: min,
        // Summation rounding can push the mean a hair outside [min, max].
        mean_eta0: mean.clamp(min, max),
        max_eta0: max,
        bandwidth_at_threshold: best,
        samples: inside.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossPoint {
    pub gamma_ratio: f64,
    pub gamma: f64,
    pub eta0: f64,
    pub eta: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSensitivity {
    /// Slope ξ of `η⁰(0) − η(0)` against `γ/κ₁`, fitted through the origin.
    pub xi: f64,
    pub reference_kappa: f64,
    pub points: Vec<LossPoint>,
}

/// Fits `η⁰(0) − η(0) ≈ ξ·γ/κ₁` with uniform γₙ = ratio·κ₁.
pub fn loss_sensitivity(cfg: &SystemConfig, gamma_ratios: &[f64]) -> Result<LossSensitivity> {
    if gamma_ratios.len() < 2 {
        return Err(Error::DegenerateFit("need at least two gamma ratios"));
    }
    for &r in gamma_ratios {
        check_finite(r, "gamma_ratio")?;
        if r <= 0.0 || r > 0.1 {
            return Err(Error::InvalidParameter {
                name: "gamma_ratio".into(),
                value: r,
                reason: "must lie in (0, 0.1]",
            });
        }
    }
    let lossless = cfg.with_uniform_gamma(0.0)?;
    let eta0 = transfer::storage_efficiency_lossless(&lossless, 0.0)?;
    let kappa = cfg.reference_kappa();
    let points = gamma_ratios
        .iter()
        .map(|&ratio| {
            let gamma = ratio * kappa;
            let eta = transfer::storage_efficiency_lossy(&cfg.with_uniform_gamma(gamma)?, 0.0)?;
            Ok(LossPoint {
                gamma_ratio: ratio,
                gamma,
                eta0,
                eta,
                deficit: eta0 - eta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sxx: f64 = points.iter().map(|p| p.gamma_ratio * p.gamma_ratio).sum();
    let sxy: f64 = points.iter().map(|p| p.gamma_ratio * p.deficit).sum();
    Ok(LossSensitivity {
        xi: sxy / sxx,
        reference_kappa: kappa,
        points,
    })
}

/// Logarithmically spaced ratios `[lo, hi]`, `count ≥ 2`.
pub fn log_ratios(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::DegenerateFit("need at least two gamma ratios"));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter {
            name: "gamma_max".into(),
            value: hi,
            reason: "need 0 < gamma_min < gamma_max",
        });
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect())
}
