use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pulse::PulseSpec;
use super::simpson;
use crate::error::{check_finite, Error, Result};
use crate::resonator::SystemConfig;
use crate::spin::DiscreteEnsemble;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Upper limit on `dt·(fastest rate)` accepted by the integrators.
pub const STEP_LIMIT: f64 = 0.1;
/// Cavities count as rung down once `Σ|bₙ|²` falls below this fraction of the input energy.
pub const RING_DOWN_FRACTION: f64 = 1e-10;
pub const MAX_DURATION: f64 = 1e4;
/// Abort once the stored energy exceeds the injected energy by this factor.
const DIVERGENCE_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Classic fourth-order Runge–Kutta on the full system.
    Rk4,
    /// Fourth-order exponential Runge–Kutta (Cox–Matthews) with the diagonal
    /// rotation and decay terms integrated exactly.
    #[default]
    ExponentialRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub dt: f64,
    /// `None` runs until the cavities have rung down after the pulse.
    pub t_end: Option<f64>,
    pub scheme: Scheme,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            dt: 0.02,
            t_end: None,
            scheme: Scheme::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// `∫|a_in,1|²dt`.
    pub input: f64,
    /// `∫|a_out,N|²dt`.
    pub output: f64,
    /// `Σₙ|bₙ(t_end)|²`.
    pub residual_cavity: f64,
    /// `Σₙⱼ|sₙⱼ(t_end)|²`.
    pub stored_spin: f64,
    /// `2Σₙγₙ∫|bₙ|²dt`.
    pub intrinsic_loss: f64,
}

impl EnergyLedger {
    pub fn imbalance(&self) -> f64 {
        self.input - self.output - self.residual_cavity - self.stored_spin - self.intrinsic_loss
    }

    /// Imbalance relative to the input energy (zero for a zero input).
    pub fn relative_imbalance(&self) -> f64 {
        if self.input == 0.0 {
            self.imbalance().abs()
        } else {
            self.imbalance().abs() / self.input
        }
    }

    pub fn storage_fraction(&self) -> f64 {
        if self.input == 0.0 {
            0.0
        } else {
            self.stored_spin / self.input
        }
    }

    pub fn output_fraction(&self) -> f64 {
        if self.input == 0.0 {
            0.0
        } else {
            self.output / self.input
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub dt: f64,
    pub scheme: Scheme,
    pub time_grid: Vec<f64>,
    pub input_series: Vec<Complex64>,
    pub output_series: Vec<Complex64>,
    /// `cavity_series[n][k] = bₙ(t_k)`, in cascade order.
    pub cavity_series: Vec<Vec<Complex64>>,
    pub final_spins: Vec<Vec<Complex64>>,
    /// Intrinsic loss rates `γₙ`, kept for the ledger.
    pub gammas: Vec<f64>,
    pub energy_ledger: EnergyLedger,
}

impl SimulationResult {
    pub fn steps(&self) -> usize {
        self.time_grid.len().saturating_sub(1)
    }
}

/// Recomputes the ledger from the stored series.
pub fn energy_ledger(result: &SimulationResult) -> EnergyLedger {
    let h = result.dt;
    let intensity = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
    let samples = result.time_grid.len();
    let mut loss = vec![0.0; samples];
    for (series, gamma) in result.cavity_series.iter().zip(&result.gammas) {
        if *gamma != 0.0 {
            for (l, b) in loss.iter_mut().zip(series) {
                *l += 2.0 * gamma * b.norm_sqr();
            }
        }
    }
    EnergyLedger {
        input: simpson(&intensity(&result.input_series), h),
        output: simpson(&intensity(&result.output_series), h),
        residual_cavity: result
            .cavity_series
            .iter()
            .filter_map(|s| s.last())
            .map(|b| b.norm_sqr())
            .sum(),
        stored_spin: result.final_spins.iter().flatten().map(|s| s.norm_sqr()).sum(),
        intrinsic_loss: simpson(&loss, h),
    }
}

/// Per-resonator constants shared by both schemes.
struct Stage {
    l_cavity: Complex64,
    sqrt_kappa: f64,
    /// Spin rotation frequencies `Δ̃ₙ + δⱼ`.
    omega: Vec<f64>,
    g: Vec<f64>,
    /// Phase applied to the output before it drives the next resonator.
    link: Complex64,
}

fn build_stages(cfg: &SystemConfig, ensembles: &[DiscreteEnsemble]) -> Result<Vec<Stage>> {
    let rs = cfg.resonators();
    if ensembles.len() != rs.len() {
        return Err(Error::LengthMismatch {
            what: "ensembles vs resonators",
            left: ensembles.len(),
            right: rs.len(),
        });
    }
    let w0 = cfg.central_frequency();
    let mut stages = Vec::with_capacity(rs.len());
    for (k, (r, e)) in rs.iter().zip(ensembles).enumerate() {
        if e.detunings.len() != e.couplings.len() {
            return Err(Error::LengthMismatch {
                what: "spin detunings vs couplings",
                left: e.detunings.len(),
                right: e.couplings.len(),
            });
        }
        let link = match rs.get(k + 1) {
            Some(next) => {
                let delay = next.position - r.position;
                if delay != 0.0 {
                    log::warn!("time-domain model ignores the propagation delay between resonators {} and {}", r.index, next.index);
                }
                Complex64::from_polar(1.0, w0 * delay)
            }
            None => Complex64::new(1.0, 0.0),
        };
        stages.push(Stage {
            l_cavity: -Complex64::new(r.gamma + 0.5 * r.kappa, r.cavity_detuning),
            sqrt_kappa: r.kappa.sqrt(),
            omega: e.detunings.iter().map(|d| r.spin_center + d).collect(),
            g: e.couplings.clone(),
            link,
        });
    }
    Ok(stages)
}

fn check_step(cfg: &SystemConfig, stages: &[Stage], dt: f64, scheme: Scheme) -> Result<()> {
    let mut scale: f64 = 0.0;
    for (r, st) in cfg.resonators().iter().zip(stages) {
        scale = scale.max(r.kappa).max(r.cavity_detuning.abs()).max(r.g_collective);
        if scheme == Scheme::Rk4 {
            scale = scale.max(st.omega.iter().fold(0.0, |m, w| m.max(w.abs())));
        }
    }
    let product = dt * scale;
    if product > STEP_LIMIT {
        return Err(Error::StepTooLarge {
            dt,
            scale,
            product,
            limit: STEP_LIMIT,
        });
    }
    Ok(())
}

/// Integrates the cascade driven by `pulse`, starting from the ground state at `t = 0`.
pub fn integrate(
    cfg: &SystemConfig,
    ensembles: &[DiscreteEnsemble],
    pulse: &PulseSpec,
    settings: &IntegrationSettings,
) -> Result<SimulationResult> {
    cfg.validate()?;
    pulse.validate()?;
    check_finite(settings.dt, "dt")?;
    if settings.dt <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "dt".into(),
            value: settings.dt,
            reason: "must be > 0",
        });
    }
    if let Some(t) = settings.t_end {
        check_finite(t, "t_end")?;
        if t <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "t_end".into(),
                value: t,
                reason: "must be > 0",
            });
        }
    }
    let stages = build_stages(cfg, ensembles)?;
    let dt = settings.dt;
    check_step(cfg, &stages, dt, settings.scheme)?;
    if pulse.duration * std::f64::consts::PI / dt < 4.0 {
        log::warn!("pulse of width {} is barely resolved by dt = {dt}", pulse.duration);
    }

    let mut stepper: Box<dyn Stepper> = match settings.scheme {
        Scheme::Rk4 => Box::new(Rk4::new(&stages)),
        Scheme::ExponentialRk4 => Box::new(Etd::new(&stages, dt)),
    };

    let drive_energy = pulse.energy();
    let max_steps = match settings.t_end {
        Some(t) => (t / dt).ceil() as usize,
        None => (MAX_DURATION / dt).ceil() as usize,
    };
    let pulse_over = pulse.end_time();

    let n = stages.len();
    let mut b = vec![ZERO; n];
    let mut spins: Vec<Vec<Complex64>> = stages.iter().map(|s| vec![ZERO; s.g.len()]).collect();
    let mut time_grid = vec![0.0];
    let mut input_series = vec![pulse.at(0.0)];
    let mut output_series = vec![cascade_output(&stages, &b, input_series[0])];
    let mut cavity_series: Vec<Vec<Complex64>> = vec![vec![ZERO]; n];
    let mut injected = 0.0;
    for k in 0..max_steps {
        let t = k as f64 * dt;
        let ain = [pulse.at(t), pulse.at(t + 0.5 * dt), pulse.at(t + dt)];
        let spin_energy = stepper.step(&stages, &mut b, &mut spins, ain, dt);
        let t_new = (k + 1) as f64 * dt;
        let cavity_energy: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        injected += 0.5 * dt * (ain[0].norm_sqr() + ain[2].norm_sqr());
        let stored = spin_energy + cavity_energy;
        if !stored.is_finite() || stored > DIVERGENCE_FACTOR * injected.max(f64::MIN_POSITIVE) && stored > 0.0 {
            return Err(Error::Unstable {
                time: t_new,
                stored,
                injected,
            });
        }
        time_grid.push(t_new);
        input_series.push(ain[2]);
        output_series.push(cascade_output(&stages, &b, ain[2]));
        for (series, z) in cavity_series.iter_mut().zip(&b) {
            series.push(*z);
        }
        if settings.t_end.is_none() && t_new >= pulse_over && cavity_energy <= RING_DOWN_FRACTION * drive_energy {
            break;
        }
    }
    if settings.t_end.is_none() && time_grid.last().copied().unwrap_or(0.0) >= MAX_DURATION {
        log::warn!("cavities did not ring down within {MAX_DURATION} time units");
    }
    let mut result = SimulationResult {
        dt,
        scheme: settings.scheme,
        time_grid,
        input_series,
        output_series,
        cavity_series,
        final_spins: spins,
        gammas: cfg.resonators().iter().map(|r| r.gamma).collect(),
        energy_ledger: EnergyLedger::default(),
    };
    result.energy_ledger = energy_ledger(&result);
    Ok(result)
}

fn cascade_output(stages: &[Stage], b: &[Complex64], a_in: Complex64) -> Complex64 {
    let mut a = a_in;
    for (st, bn) in stages.iter().zip(b) {
        a = st.link * (a - st.sqrt_kappa * bn);
    }
    a
}

trait Stepper {
    /// Advances one step; `a_in = [a(t), a(t+h/2), a(t+h)]`. Returns `Σ|s|²` after the step.
    fn step(&mut self, stages: &[Stage], b: &mut [Complex64], spins: &mut [Vec<Complex64>], a_in: [Complex64; 3], h: f64)
        -> f64;
}

struct Rk4 {
    kb: [Vec<Complex64>; 4],
    ks: [Vec<Vec<Complex64>>; 4],
    tb: Vec<Complex64>,
    ts: Vec<Vec<Complex64>>,
}

impl Rk4 {
    fn new(stages: &[Stage]) -> Self {
        let n = stages.len();
        let spins = || stages.iter().map(|s| vec![ZERO; s.g.len()]).collect::<Vec<_>>();
        Self {
            kb: std::array::from_fn(|_| vec![ZERO; n]),
            ks: std::array::from_fn(|_| spins()),
            tb: vec![ZERO; n],
            ts: spins(),
        }
    }
}

fn derivative(
    stages: &[Stage],
    b: &[Complex64],
    s: &[Vec<Complex64>],
    a_in: Complex64,
    db: &mut [Complex64],
    ds: &mut [Vec<Complex64>],
) {
    let mut a = a_in;
    for (k, st) in stages.iter().enumerate() {
        let bn = b[k];
        let mut coupling = ZERO;
        for ((d, sj), (&g, &w)) in ds[k].iter_mut().zip(&s[k]).zip(st.g.iter().zip(&st.omega)) {
            coupling += g * sj;
            *d = -I * (w * sj + g * bn);
        }
        db[k] = st.l_cavity * bn - I * coupling + st.sqrt_kappa * a;
        a = st.link * (a - st.sqrt_kappa * bn);
    }
}

impl Stepper for Rk4 {
    fn step(&mut self, stages: &[Stage], b: &mut [Complex64], spins: &mut [Vec<Complex64>], a_in: [Complex64; 3], h: f64) -> f64 {
        let drives = [a_in[0], a_in[1], a_in[1], a_in[2]];
        let fractions = [0.5, 0.5, 1.0];
        for stage in 0..4 {
            let (done, rest) = self.kb.split_at_mut(stage);
            let (sdone, srest) = self.ks.split_at_mut(stage);
            if stage == 0 {
                derivative(stages, b, spins, drives[0], &mut rest[0], &mut srest[0]);
                continue;
            }
            let c = fractions[stage - 1] * h;
            for (t, (x, k)) in self.tb.iter_mut().zip(b.iter().zip(&done[stage - 1])) {
                *t = x + c * k;
            }
            for (ts, (xs, ks)) in self.ts.iter_mut().zip(spins.iter().zip(&sdone[stage - 1])) {
                for (t, (x, k)) in ts.iter_mut().zip(xs.iter().zip(ks)) {
                    *t = x + c * k;
                }
            }
            derivative(stages, &self.tb, &self.ts, drives[stage], &mut rest[0], &mut srest[0]);
        }
        let w = h / 6.0;
        let [k1, k2, k3, k4] = &self.kb;
        for (i, x) in b.iter_mut().enumerate() {
            *x += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        let [s1, s2, s3, s4] = &self.ks;
        let mut energy = 0.0;
        for (n, xs) in spins.iter_mut().enumerate() {
            for (j, x) in xs.iter_mut().enumerate() {
                *x += w * (s1[n][j] + 2.0 * (s2[n][j] + s3[n][j]) + s4[n][j]);
                energy += x.norm_sqr();
            }
        }
        energy
    }
}

/// `φ₁..φ₃` and `e^{z}`, `e^{z/2}` for the exponential scheme.
#[derive(Debug, Clone, Copy)]
struct EtdCoefficients {
    e: Complex64,
    e2: Complex64,
    q: Complex64,
    f1: Complex64,
    f2: Complex64,
    f3: Complex64,
}

fn phi(z: Complex64) -> [Complex64; 3] {
    if z.norm() < 1.0 {
        // φ_k(z) = Σ_m z^m/(m+k)!
        let mut out = [ZERO; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0 / factorial(k + 1), 0.0);
            let mut m = 0;
            while term.norm() > 1e-18 * o.norm().max(1e-300) || m < 3 {
                *o += term;
                m += 1;
                term *= z / (m + k + 1) as f64;
                if m > 40 {
                    break;
                }
            }
        }
        out
    } else {
        let ez = z.exp();
        let p1 = (ez - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl EtdCoefficients {
    fn new(l: Complex64, h: f64) -> Self {
        let z = l * h;
        let [p1, p2, p3] = phi(z);
        let [q1, _, _] = phi(0.5 * z);
        Self {
            e: z.exp(),
            e2: (0.5 * z).exp(),
            q: 0.5 * h * q1,
            f1: h * (p1 - 3.0 * p2 + 4.0 * p3),
            f2: h * (p2 - 2.0 * p3),
            f3: h * (4.0 * p3 - p2),
        }
    }
}

struct EtdResonator {
    cavity: EtdCoefficients,
    spins: Vec<EtdCoefficients>,
    /// `Σ g²Q` and `Σ g²e^{Lh/2}Q` over the spins.
    k_q: Complex64,
    k_eq: Complex64,
}

struct Etd {
    res: Vec<EtdResonator>,
}

impl Etd {
    fn new(stages: &[Stage], h: f64) -> Self {
        let res = stages
            .iter()
            .map(|st| {
                let spins: Vec<EtdCoefficients> = st.omega.iter().map(|&w| EtdCoefficients::new(Complex64::new(0.0, -w), h)).collect();
                let k_q = spins.iter().zip(&st.g).map(|(c, g)| g * g * c.q).sum();
                let k_eq = spins.iter().zip(&st.g).map(|(c, g)| g * g * c.e2 * c.q).sum();
                EtdResonator {
                    cavity: EtdCoefficients::new(st.l_cavity, h),
                    spins,
                    k_q,
                    k_eq,
                }
            })
            .collect();
        Self { res }
    }
}

impl Stepper for Etd {
    fn step(&mut self, stages: &[Stage], b: &mut [Complex64], spins: &mut [Vec<Complex64>], a_in: [Complex64; 3], _h: f64) -> f64 {
        // Drives at the four stages: u (t), a (t+h/2), b (t+h/2), c (t+h).
        let mut drive = [a_in[0], a_in[1], a_in[1], a_in[2]];
        let mut energy = 0.0;
        for (n, (st, er)) in stages.iter().zip(&self.res).enumerate() {
            let c = &er.cavity;
            let bu = b[n];
            let (mut sum_u, mut p, mut r) = (ZERO, ZERO, ZERO);
            for ((s, k), g) in spins[n].iter().zip(&er.spins).zip(&st.g) {
                let gs = g * s;
                sum_u += gs;
                p += k.e2 * gs;
                r += k.e * gs;
            }
            let sk = st.sqrt_kappa;
            let nu = -I * sum_u + sk * drive[0];
            let ba = c.e2 * bu + c.q * nu;
            let na = -I * (p - I * bu * er.k_q) + sk * drive[1];
            let bb = c.e2 * bu + c.q * na;
            let nb = -I * (p - I * ba * er.k_q) + sk * drive[2];
            let bc = c.e2 * ba + c.q * (2.0 * nb - nu);
            let nc = -I * (r - I * bu * er.k_eq - I * (2.0 * bb - bu) * er.k_q) + sk * drive[3];
            b[n] = c.e * bu + c.f1 * nu + 2.0 * c.f2 * (na + nb) + c.f3 * nc;
            let ab = ba + bb;
            for ((s, k), g) in spins[n].iter_mut().zip(&er.spins).zip(&st.g) {
                *s = k.e * *s - I * g * (k.f1 * bu + 2.0 * k.f2 * ab + k.f3 * bc);
                energy += s.norm_sqr();
            }
            for (d, bx) in drive.iter_mut().zip([bu, ba, bb, bc]) {
                *d = st.link * (*d - sk * bx);
            }
        }
        energy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_series_and_closed_form_agree_at_the_seam() {
        for z in [Complex64::new(0.0, 0.999), Complex64::new(-0.7, 0.7), Complex64::new(0.0, 1.001)] {
            let a = phi(z);
            let ez = z.exp();
            let p1 = (ez - 1.0) / z;
            let p2 = (ez - 1.0 - z) / (z * z);
            let p3 = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
            for (x, y) in a.iter().zip([p1, p2, p3]) {
                assert!((x - y).norm() < 1e-13, "{z}: {x} vs {y}");
            }
        }
        let zero = phi(ZERO);
        assert!((zero[0].re - 1.0).abs() < 1e-16);
        assert!((zero[1].re - 0.5).abs() < 1e-16);
        assert!((zero[2].re - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn ledger_arithmetic() {
        let l = EnergyLedger {
            input: 2.0,
            output: 0.5,
            residual_cavity: 0.25,
            stored_spin: 1.0,
            intrinsic_loss: 0.25,
        };
        assert_eq!(l.imbalance(), 0.0);
        assert_eq!(l.storage_fraction(), 0.5);
        assert_eq!(EnergyLedger::default().relative_imbalance(), 0.0);
    }
}
