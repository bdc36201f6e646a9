//! Named configurations used by tests, the CLI and the bundled fixtures.

use crate::resonator::{ResonatorSpec, SystemConfig};

/// Reference four-resonator optimum (Δ = 1, γ = 0), mirrored with Δ₋ₙ = −Δₙ.
pub const REFERENCE_LINEWIDTH: f64 = 1.8;
pub const REFERENCE_KAPPA: [f64; 2] = [3.27, 2.03];
pub const REFERENCE_G: [f64; 2] = [1.78, 1.49];
pub const REFERENCE_DETUNING: [f64; 2] = [0.48, 1.13];

pub fn reference_half() -> Vec<ResonatorSpec> {
    (0..2)
        .map(|k| {
            ResonatorSpec::new(
                k as i32 + 1,
                REFERENCE_KAPPA[k],
                REFERENCE_DETUNING[k],
                REFERENCE_G[k],
                REFERENCE_LINEWIDTH,
                1.0,
            )
        })
        .collect()
}

pub fn reference_config() -> SystemConfig {
    SystemConfig::mirrored(reference_half(), 1.0, 0.0).expect("reference parameters are valid")
}

/// Reference cascade with every coupling removed: a lossless all-pass.
pub fn all_pass_config() -> SystemConfig {
    let half = reference_half()
        .into_iter()
        .map(|r| ResonatorSpec { g_collective: 0.0, ..r })
        .collect();
    SystemConfig::mirrored(half, 1.0, 0.0).expect("valid")
}

/// One cavity with `κ/2 = G²/δ` and all lines at ω = 0.
pub fn matched_single_cavity() -> SystemConfig {
    let r = ResonatorSpec::new(1, 2.0, 0.0, 1.0, 1.0, 1.0).with_spin_center(0.0);
    SystemConfig::new(vec![r], 1.0, 0.0).expect("valid")
}
