use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::resonator::SystemConfig;
use crate::transfer::transfer_function;

/// Linear-response output `F⁻¹[S(ω)·F[a_in]]` on a uniform time grid.
///
/// The input is zero-padded to a power of two of at least twice its length,
/// so the circular convolution does not wrap within the grid.
pub fn frequency_propagate(cfg: &SystemConfig, input_series: &[Complex64], time_grid: &[f64]) -> Result<Vec<Complex64>> {
    let n = input_series.len();
    if n == 0 || time_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if time_grid.len() != n {
        return Err(Error::LengthMismatch {
            what: "input series vs time grid",
            left: n,
            right: time_grid.len(),
        });
    }
    if n == 1 {
        return Ok(vec![transfer_function(cfg, 0.0)? * input_series[0]]);
    }
    let dt = (time_grid[n - 1] - time_grid[0]) / (n - 1) as f64;
    for (k, w) in time_grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::UnsortedGrid(k + 1));
        }
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Problem("time grid must be uniform".into()));
        }
    }
    let peak = input_series.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = input_series[0].norm().max(input_series[n - 1].norm());
    if peak > 0.0 && edge > 1e-6 * peak {
        log::warn!("input does not decay at the grid edges ({:.2e} of peak); expect spectral leakage", edge / peak);
    }

    let size = (2 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    buf[..n].copy_from_slice(input_series);
    let mut planner = FftPlanner::new();
    // u(ω) ∝ Σ u(t) e^{+iωt}: the unnormalized inverse transform.
    planner.plan_fft_inverse(size).process(&mut buf);
    let dw = 2.0 * std::f64::consts::PI / (size as f64 * dt);
    for (k, v) in buf.iter_mut().enumerate() {
        let m = if k <= size / 2 { k as f64 } else { k as f64 - size as f64 };
        *v *= transfer_function(cfg, m * dw)?;
    }
    planner.plan_fft_forward(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    Ok(buf[..n].iter().map(|z| z * scale).collect())
}

/// `‖a − b‖₂ / ‖reference‖₂`.
pub fn relative_l2_error(a: &[Complex64], b: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "series lengths",
            left: a.len(),
            right: b.len(),
        });
    }
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = reference.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::DegenerateFit("reference series has zero norm"));
    }
    Ok((diff / norm).sqrt())
}
