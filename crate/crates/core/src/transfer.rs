//! Transfer function of the cascade, per-cavity field amplitudes and the
//! storage-efficiency formulas built on them.

use num_complex::Complex64;

use crate::error::{check_finite, Error, Result};
use crate::resonator::{ResonatorSpec, SystemConfig};

/// Spin-ensemble susceptibility `G²/(δ − i(ω − Δ̃))`.
#[inline]
pub(crate) fn spin_term(res: &ResonatorSpec, omega: f64) -> Complex64 {
    let g2 = res.g_collective * res.g_collective;
    g2 / Complex64::new(res.spin_linewidth, -(omega - res.spin_center))
}

/// `−i(ω − Δₙ′)` with `Δₙ′ = Δₙ − iγₙ`, i.e. `γₙ − i(ω − Δₙ)`.
#[inline]
fn detuning_term(res: &ResonatorSpec, omega: f64) -> Complex64 {
    Complex64::new(res.gamma, -(omega - res.cavity_detuning))
}

/// Denominator `κ/2 − i(ω − Δ′) + G²/(δ − i(ω − Δ̃))` shared by the factor and
/// the cavity amplitude.
#[inline]
pub(crate) fn cavity_denominator(res: &ResonatorSpec, omega: f64) -> Complex64 {
    0.5 * res.kappa + detuning_term(res, omega) + spin_term(res, omega)
}

/// One factor of the cascade product:
/// `[−κ/2 − i(ω−Δ′) + χ] / [κ/2 − i(ω−Δ′) + χ]` with `χ = G²/(δ − i(ω−Δ̃))`.
///
/// Its magnitude never exceeds one for γ ≥ 0, since both the intrinsic loss
/// and the spin term have nonnegative real part.
pub fn single_factor(res: &ResonatorSpec, omega: f64) -> Result<Complex64> {
    check_finite(omega, "omega")?;
    res.validate()?;
    let common = detuning_term(res, omega) + spin_term(res, omega);
    let den = 0.5 * res.kappa + common;
    if den.norm_sqr() == 0.0 {
        return Err(Error::Singular {
            index: res.index,
            omega,
        });
    }
    Ok((common - 0.5 * res.kappa) / den)
}

/// Propagation phase `Φ(ω) = (ω + ω₀)(z_N − z₁)/c`, positions given as delays.
pub(crate) fn propagation_phase(cfg: &SystemConfig, omega: f64) -> f64 {
    let rs = cfg.resonators();
    let span = rs[rs.len() - 1].position - rs[0].position;
    (omega + cfg.central_frequency()) * span
}

/// Complex reflection `S(ω) = a_out,N / a_in,1` of the whole cascade.
pub fn transfer_function(cfg: &SystemConfig, omega: f64) -> Result<Complex64> {
    if cfg.is_empty() {
        return Err(Error::EmptyCascade);
    }
    let mut s = Complex64::from_polar(1.0, propagation_phase(cfg, omega));
    for r in cfg.resonators() {
        s *= single_factor(r, omega)?;
    }
    Ok(s)
}

/// Cavity amplitudes `Tₙ(ω) = bₙ(ω)/a_in,1(ω)` from a sequential cascade solve.
pub fn cavity_amplitudes(cfg: &SystemConfig, omega: f64) -> Result<Vec<Complex64>> {
    Ok(cascade_solve(cfg, omega)?.0)
}

/// Solves the cascade and also returns the output field `a_out,N/a_in,1`.
pub(crate) fn cascade_solve(cfg: &SystemConfig, omega: f64) -> Result<(Vec<Complex64>, Complex64)> {
    check_finite(omega, "omega")?;
    if cfg.is_empty() {
        return Err(Error::EmptyCascade);
    }
    let rs = cfg.resonators();
    let mut a_in = Complex64::new(1.0, 0.0);
    let mut amps = Vec::with_capacity(rs.len());
    for (k, r) in rs.iter().enumerate() {
        let den = cavity_denominator(r, omega);
        if den.norm_sqr() == 0.0 {
            return Err(Error::Singular { index: r.index, omega });
        }
        let sqrt_k = r.kappa.sqrt();
        let b = sqrt_k * a_in / den;
        amps.push(b);
        let a_out = a_in - sqrt_k * b;
        a_in = match rs.get(k + 1) {
            Some(next) => {
                a_out * Complex64::from_polar(1.0, (omega + cfg.central_frequency()) * (next.position - r.position))
            }
            None => a_out,
        };
    }
    Ok((amps, a_in))
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `η⁰(ω) = 1 − |S(ω)|²`.
pub fn storage_efficiency_lossless(cfg: &SystemConfig, omega: f64) -> Result<f64> {
    Ok(clamp_unit(1.0 - transfer_function(cfg, omega)?.norm_sqr()))
}

/// `η(ω) = 1 − |S(ω)|² − Σₙ 2γₙ|Tₙ(ω)|²`.
///
/// The cavity energy `|bₙ|²` decays at `2γₙ` because γₙ is an amplitude rate,
/// so the drain term is what the time-domain energy ledger accumulates.
pub fn storage_efficiency_lossy(cfg: &SystemConfig, omega: f64) -> Result<f64> {
    let reflected = transfer_function(cfg, omega)?.norm_sqr();
    let amps = cavity_amplitudes(cfg, omega)?;
    let drained: f64 = cfg
        .resonators()
        .iter()
        .zip(&amps)
        .map(|(r, t)| 2.0 * r.gamma * t.norm_sqr())
        .sum();
    Ok(clamp_unit(1.0 - reflected - drained))
}

/// Echo-retrieval efficiency `e^{−2T/T₂}·η_stor²` after storage time `T`.
pub fn total_efficiency(eta_stor: f64, storage_time: f64, t2: f64) -> Result<f64> {
    check_finite(eta_stor, "eta_stor")?;
    check_finite(storage_time, "storage_time")?;
    check_finite(t2, "t2")?;
    if t2 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "t2".into(),
            value: t2,
            reason: "must be > 0",
        });
    }
    if !(0.0..=1.0).contains(&eta_stor) {
        return Err(Error::InvalidParameter {
            name: "eta_stor".into(),
            value: eta_stor,
            reason: "must lie in [0, 1]",
        });
    }
    if storage_time < 0.0 {
        return Err(Error::InvalidParameter {
            name: "storage_time".into(),
            value: storage_time,
            reason: "must be >= 0",
        });
    }
    Ok((-2.0 * storage_time / t2).exp() * eta_stor * eta_stor)
}

/// Numerator of one factor after clearing the spin denominator:
/// `(−κ/2 − i(ω−Δ′))(δ − i(ω−Δ̃)) + G²`.
pub(crate) fn factor_numerator(res: &ResonatorSpec, omega: f64) -> Complex64 {
    let a = detuning_term(res, omega) - 0.5 * res.kappa;
    let b = Complex64::new(res.spin_linewidth, -(omega - res.spin_center));
    a * b + res.g_collective * res.g_collective
}
