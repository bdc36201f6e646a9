//! Frequency-domain model, spectral optimizer and time-domain oracle for a
//! cascade of waveguide-coupled ring resonators, each loaded with an
//! inhomogeneously broadened spin ensemble.
//!
//! All rates are dimensionless and measured in units of the comb spacing Δ
//! carried by [`SystemConfig`]. The waveguide field convention is
//! `u(t) = (2π)^{-1/2} ∫ dω u(ω) e^{-iωt}`, so a carrier offset `ω` appears as
//! `e^{-iωt}` in time-domain series.

pub mod error;
pub mod io;
pub mod optimize;
pub mod presets;
pub mod resonator;
pub mod spectrum;
pub mod spin;
pub mod timedomain;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use optimize::{optimize, FreeMask, OptimizationProblem, OptimizationResult, OptimizerSettings, Start};
pub use resonator::{default_spin_center, ResonatorSpec, SystemConfig};
pub use spectrum::{
    band_metrics, evaluate_spectrum, loss_sensitivity, uniform_grid, BandMetrics, ComplexSpectrum,
    EfficiencySpectrum, LossSensitivity,
};
pub use spin::{absorption_coefficient, discretize, lorentzian_density, DiscreteEnsemble, SpinEnsembleSpec};
pub use timedomain::{frequency_propagate, integrate, simulate, EnergyLedger, PulseSpec, SimulationResult};
pub use transfer::{
    cavity_amplitudes, single_factor, storage_efficiency_lossless, storage_efficiency_lossy,
    total_efficiency, transfer_function,
};
