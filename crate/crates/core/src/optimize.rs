//! Spectral-point optimization of the cascade parameters.
//!
//! The target is `S(ω) ≈ 0` across the band. Following the polynomial form of
//! the problem, the residual at each spectral point is the numerator of the
//! rational function `S(ω)`, i.e. `Πₙ [(−κₙ/2 − i(ω−Δₙ′))(δₙ − i(ω−Δ̃ₙ)) + Gₙ²]`.
//! The center condition `S(0) = 0` enters as a heavily weighted point. A
//! bounded Levenberg–Marquardt iteration with an analytic Jacobian is run from
//! each start and the lowest objective wins.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::resonator::{ResonatorSpec, SystemConfig};
use crate::transfer::{factor_numerator, transfer_function};

/// Which parameter families are varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeMask {
    /// Shared linewidth δ̃ applied to every ensemble.
    pub spin_linewidth: bool,
    pub g_collective: bool,
    pub cavity_detuning: bool,
    pub kappa: bool,
}

impl FreeMask {
    /// `{δ̃, Gₙ, Δₙ}` with the couplings κₙ held at their template values.
    pub const KAPPA_FIXED: Self = Self {
        spin_linewidth: true,
        g_collective: true,
        cavity_detuning: true,
        kappa: false,
    };

    pub const ALL: Self = Self {
        spin_linewidth: true,
        g_collective: true,
        cavity_detuning: true,
        kappa: true,
    };

    pub fn any(&self) -> bool {
        self.spin_linewidth || self.g_collective || self.cavity_detuning || self.kappa
    }

    /// Parses family names as used in config files and on the command line.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut mask = Self {
            spin_linewidth: false,
            g_collective: false,
            cavity_detuning: false,
            kappa: false,
        };
        for n in names {
            match n.as_ref() {
                "spin_linewidth" => mask.spin_linewidth = true,
                "g_collective" => mask.g_collective = true,
                "cavity_detuning" => mask.cavity_detuning = true,
                "kappa" => mask.kappa = true,
                other => return Err(Error::Problem(format!("unknown free parameter `{other}`"))),
            }
        }
        Ok(mask)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.spin_linewidth {
            v.push("spin_linewidth");
        }
        if self.g_collective {
            v.push("g_collective");
        }
        if self.cavity_detuning {
            v.push("cavity_detuning");
        }
        if self.kappa {
            v.push("kappa");
        }
        v
    }
}

impl Default for FreeMask {
    fn default() -> Self {
        Self::KAPPA_FIXED
    }
}

/// Closed boxes `[lo, hi]` per parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub kappa: [f64; 2],
    pub g_collective: [f64; 2],
    pub spin_linewidth: [f64; 2],
    pub cavity_detuning: [f64; 2],
}

/// Positive lower limit standing in for the open end of `(0, hi]`.
pub const POSITIVE_FLOOR: f64 = 1e-6;

impl Bounds {
    /// κ, G ∈ (0, 10Δ]; δ̃ ∈ (0, 5Δ]; Δₙ ∈ [−NΔ, NΔ] with N the pair count.
    pub fn default_for(comb_spacing: f64, half_count: usize) -> Self {
        let d = comb_spacing;
        let n = half_count.max(1) as f64;
        Self {
            kappa: [POSITIVE_FLOOR * d, 10.0 * d],
            g_collective: [POSITIVE_FLOOR * d, 10.0 * d],
            spin_linewidth: [POSITIVE_FLOOR * d, 5.0 * d],
            cavity_detuning: [-n * d, n * d],
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &str, b: [f64; 2], positive: bool| -> Result<()> {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::Problem(format!("bounds for `{name}` must satisfy lo < hi")));
            }
            if positive && b[0] <= 0.0 {
                return Err(Error::Problem(format!("lower bound for `{name}` must be > 0")));
            }
            Ok(())
        };
        check("kappa", self.kappa, true)?;
        check("g_collective", self.g_collective, true)?;
        check("spin_linewidth", self.spin_linewidth, true)?;
        check("cavity_detuning", self.cavity_detuning, false)
    }
}

/// `{0} ∪ {m·Δ̃_edge/(2N_opt) : m = 1..N_opt}` with `N_opt = 2N − 1` and
/// `Δ̃_edge = Δ(N − 1/2)` the outermost spin-line center.
pub fn default_spectral_points(half_count: usize, comb_spacing: f64) -> Vec<f64> {
    let n = half_count.max(1);
    let n_opt = 2 * n - 1;
    let edge = comb_spacing * (n as f64 - 0.5);
    std::iter::once(0.0)
        .chain((1..=n_opt).map(|m| m as f64 * edge / (2 * n_opt) as f64))
        .collect()
}

/// Weight of the `ω = 0` point: `10⁶·N_opt`.
pub fn default_center_weight(half_count: usize) -> f64 {
    1e6 * (2 * half_count.max(1) - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Linewidth,
    Coupling,
    Detuning,
    Kappa,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    family: Family,
    /// Position in the resonator list; unused for the shared linewidth.
    position: usize,
    mirror: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub template: SystemConfig,
    pub free: FreeMask,
    pub enforce_symmetry: bool,
    pub spectral_points: Vec<f64>,
    pub center_constraint_weight: f64,
    pub bounds: Bounds,
}

impl OptimizationProblem {
    /// Defaults: κ-fixed free set, symmetry taken from the template, default
    /// points, weight and bounds.
    pub fn new(template: SystemConfig) -> Result<Self> {
        let n = template.half_count();
        let d = template.comb_spacing();
        let enforce_symmetry = template.symmetric();
        let problem = Self {
            spectral_points: default_spectral_points(n, d),
            center_constraint_weight: default_center_weight(n),
            bounds: Bounds::default_for(d, n),
            free: FreeMask::default(),
            enforce_symmetry,
            template,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_free(mut self, free: FreeMask) -> Result<Self> {
        self.free = free;
        self.validate()?;
        Ok(self)
    }

    pub fn with_symmetry(mut self, enforce: bool) -> Result<Self> {
        self.enforce_symmetry = enforce;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.free.any() {
            return Err(Error::Problem("no free parameters selected".into()));
        }
        if self.spectral_points.is_empty() {
            return Err(Error::Problem("no spectral points".into()));
        }
        for (k, w) in self.spectral_points.iter().enumerate() {
            check_finite(*w, "spectral_point")?;
            if self.spectral_points[..k].contains(w) {
                return Err(Error::Problem(format!("spectral point {w} listed twice")));
            }
        }
        check_finite(self.center_constraint_weight, "center_constraint_weight")?;
        if self.center_constraint_weight <= 0.0 {
            return Err(Error::Problem("center_constraint_weight must be > 0".into()));
        }
        self.bounds.validate()?;
        if self.enforce_symmetry {
            symmetrize(&self.template)?;
        }
        Ok(())
    }

    /// Template actually used as the base point (mirrored when symmetry is enforced).
    pub fn base_config(&self) -> Result<SystemConfig> {
        if self.enforce_symmetry {
            symmetrize(&self.template)
        } else {
            Ok(self.template.clone().into_unconstrained())
        }
    }

    fn slots(&self, base: &SystemConfig) -> Vec<Slot> {
        let rs = base.resonators();
        let mut slots = Vec::new();
        if self.free.spin_linewidth {
            slots.push(Slot {
                family: Family::Linewidth,
                position: 0,
                mirror: None,
            });
        }
        for (p, r) in rs.iter().enumerate() {
            let mirror = if self.enforce_symmetry {
                if r.index < 0 {
                    continue;
                }
                rs.iter().position(|q| q.index == -r.index)
            } else {
                None
            };
            for (on, family) in [
                (self.free.g_collective, Family::Coupling),
                (self.free.cavity_detuning, Family::Detuning),
                (self.free.kappa, Family::Kappa),
            ] {
                if on {
                    slots.push(Slot {
                        family,
                        position: p,
                        mirror,
                    });
                }
            }
        }
        slots
    }

    /// Names of the free parameters in vector order.
    pub fn parameter_names(&self) -> Result<Vec<String>> {
        let base = self.base_config()?;
        let rs = base.resonators();
        Ok(self
            .slots(&base)
            .iter()
            .map(|s| match s.family {
                Family::Linewidth => "spin_linewidth".to_string(),
                Family::Coupling => format!("g_collective[{}]", rs[s.position].index),
                Family::Detuning => format!("cavity_detuning[{}]", rs[s.position].index),
                Family::Kappa => format!("kappa[{}]", rs[s.position].index),
            })
            .collect())
    }

    fn bound_of(&self, family: Family) -> [f64; 2] {
        match family {
            Family::Linewidth => self.bounds.spin_linewidth,
            Family::Coupling => self.bounds.g_collective,
            Family::Detuning => self.bounds.cavity_detuning,
            Family::Kappa => self.bounds.kappa,
        }
    }

    /// Free-parameter vector read from `cfg` (which must share the template's layout).
    pub fn params_of(&self, cfg: &SystemConfig) -> Result<Vec<f64>> {
        let base = self.base_config()?;
        if cfg.len() != base.len() {
            return Err(Error::LengthMismatch {
                what: "config vs template resonators",
                left: cfg.len(),
                right: base.len(),
            });
        }
        let rs = cfg.resonators();
        Ok(self
            .slots(&base)
            .iter()
            .map(|s| match s.family {
                Family::Linewidth => rs[0].spin_linewidth,
                Family::Coupling => rs[s.position].g_collective,
                Family::Detuning => rs[s.position].cavity_detuning,
                Family::Kappa => rs[s.position].kappa,
            })
            .collect())
    }

    /// Writes `params` into a copy of the base config.
    pub fn apply(&self, params: &[f64]) -> Result<SystemConfig> {
        let base = self.base_config()?;
        let slots = self.slots(&base);
        if params.len() != slots.len() {
            return Err(Error::LengthMismatch {
                what: "parameter vector vs free slots",
                left: params.len(),
                right: slots.len(),
            });
        }
        let mut rs: Vec<ResonatorSpec> = base.resonators().to_vec();
        for (slot, &v) in slots.iter().zip(params) {
            check_finite(v, "parameter")?;
            match slot.family {
                Family::Linewidth => rs.iter_mut().for_each(|r| r.spin_linewidth = v),
                Family::Coupling => {
                    rs[slot.position].g_collective = v;
                    if let Some(m) = slot.mirror {
                        rs[m].g_collective = v;
                    }
                }
                Family::Detuning => {
                    rs[slot.position].cavity_detuning = v;
                    if let Some(m) = slot.mirror {
                        rs[m].cavity_detuning = -v;
                    }
                }
                Family::Kappa => {
                    rs[slot.position].kappa = v;
                    if let Some(m) = slot.mirror {
                        rs[m].kappa = v;
                    }
                }
            }
        }
        base.with_resonators(rs)
    }

    fn check_bounds(&self, params: &[f64]) -> Result<()> {
        let base = self.base_config()?;
        let names = self.parameter_names()?;
        for ((slot, &v), name) in self.slots(&base).iter().zip(params).zip(names) {
            let [lo, hi] = self.bound_of(slot.family);
            if !(lo..=hi).contains(&v) {
                return Err(Error::OutOfBounds { name, value: v, lo, hi });
            }
        }
        Ok(())
    }

    fn point_weight(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            self.center_constraint_weight
        } else {
            1.0
        }
    }
}

/// `numer(S(ω)) = Πₙ [(−κₙ/2 − i(ω−Δₙ′))(δₙ − i(ω−Δ̃ₙ)) + Gₙ²]`.
pub fn numerator(cfg: &SystemConfig, omega: f64) -> Complex64 {
    cfg.resonators().iter().map(|r| factor_numerator(r, omega)).product()
}

/// `w₀|numer(S(0))|² + Σ_{m≥1}|numer(S(ω_m))|²` for a full configuration.
pub fn objective_of(cfg: &SystemConfig, problem: &OptimizationProblem) -> f64 {
    problem
        .spectral_points
        .iter()
        .map(|&w| problem.point_weight(w) * numerator(cfg, w).norm_sqr())
        .sum()
}

/// Objective of a free-parameter vector; errors when outside the bounds.
pub fn objective(params: &[f64], problem: &OptimizationProblem) -> Result<f64> {
    problem.check_bounds(params)?;
    Ok(objective_of(&problem.apply(params)?, problem))
}

/// Copies each `+n` resonator onto `−n`, negating Δ and Δ̃.
pub fn symmetrize(cfg: &SystemConfig) -> Result<SystemConfig> {
    let rs = cfg.resonators();
    let mut out = Vec::with_capacity(rs.len());
    for r in rs {
        let partner = cfg.resonator(-r.index).ok_or(Error::UnpairedIndex(r.index))?;
        if r.index > 0 {
            out.push(*r);
        } else {
            out.push(ResonatorSpec {
                position: r.position,
                ..partner.mirrored()
            });
        }
    }
    cfg.clone()
        .into_unconstrained()
        .with_resonators(out)?
        .with_symmetric_flag(true)
}

/// Residuals `√w·numer(S(ω_m))` split into real and imaginary parts, plus
/// their Jacobian with respect to the free slots.
struct Residuals<'a> {
    problem: &'a OptimizationProblem,
    slots: Vec<Slot>,
    bounds: Vec<[f64; 2]>,
}

impl<'a> Residuals<'a> {
    fn new(problem: &'a OptimizationProblem) -> Result<Self> {
        let base = problem.base_config()?;
        let slots = problem.slots(&base);
        let bounds = slots.iter().map(|s| problem.bound_of(s.family)).collect();
        Ok(Self { problem, slots, bounds })
    }

    fn dim(&self) -> usize {
        self.slots.len()
    }

    fn rows(&self) -> usize {
        2 * self.problem.spectral_points.len()
    }

    fn evaluate(&self, params: &[f64], jacobian: Option<&mut DMatrix<f64>>) -> Result<DVector<f64>> {
        let cfg = self.problem.apply(params)?;
        let rs = cfg.resonators();
        let n = rs.len();
        let mut r = DVector::zeros(self.rows());
        let mut jac = jacobian;
        let mut factors = vec![Complex64::new(0.0, 0.0); n];
        let mut others = vec![Complex64::new(0.0, 0.0); n];
        for (m, &w) in self.problem.spectral_points.iter().enumerate() {
            let sw = self.problem.point_weight(w).sqrt();
            for (f, res) in factors.iter_mut().zip(rs) {
                *f = factor_numerator(res, w);
            }
            let value: Complex64 = factors.iter().product::<Complex64>() * sw;
            r[2 * m] = value.re;
            r[2 * m + 1] = value.im;
            let Some(j) = jac.as_deref_mut() else { continue };
            // Products over all factors but one, without dividing by zero.
            for (k, o) in others.iter_mut().enumerate() {
                *o = factors
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, f)| *f)
                    .product::<Complex64>()
                    * sw;
            }
            let spin_den = |p: usize| Complex64::new(rs[p].spin_linewidth, -(w - rs[p].spin_center));
            for (c, slot) in self.slots.iter().enumerate() {
                let d = match slot.family {
                    Family::Linewidth => (0..n)
                        .map(|p| (Complex64::new(rs[p].gamma, -(w - rs[p].cavity_detuning)) - 0.5 * rs[p].kappa) * others[p])
                        .sum(),
                    _ => {
                        let one = |p: usize, sign: f64| -> Complex64 {
                            match slot.family {
                                Family::Coupling => 2.0 * rs[p].g_collective * others[p],
                                Family::Detuning => sign * Complex64::i() * spin_den(p) * others[p],
                                Family::Kappa => -0.5 * spin_den(p) * others[p],
                                Family::Linewidth => unreachable!(),
                            }
                        };
                        let mut d = one(slot.position, 1.0);
                        if let Some(q) = slot.mirror {
                            d += one(q, -1.0);
                        }
                        d
                    }
                };
                j[(2 * m, c)] = d.re;
                j[(2 * m + 1, c)] = d.im;
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LocalRun {
    objective: f64,
    iterations: usize,
}

const MAX_DAMPING: f64 = 1e16;

/// Bounded Levenberg–Marquardt with Marquardt scaling. Parameters pinned at a
/// bound with the gradient pushing outward are frozen for that step.
fn levenberg_marquardt(res: &Residuals, x: &mut [f64], max_iterations: usize) -> Result<LocalRun> {
    let n = res.dim();
    for (v, b) in x.iter_mut().zip(&res.bounds) {
        *v = v.clamp(b[0], b[1]);
    }
    let mut jac = DMatrix::zeros(res.rows(), n);
    let mut r = res.evaluate(x, Some(&mut jac))?;
    let mut f = r.norm_squared();
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iterations && f > 0.0 {
        iterations += 1;
        let g = jac.transpose() * &r;
        let a = jac.transpose() * &jac;
        let active: Vec<usize> = (0..n)
            .filter(|&k| {
                let [lo, hi] = res.bounds[k];
                !((x[k] <= lo && g[k] > 0.0) || (x[k] >= hi && g[k] < 0.0))
            })
            .collect();
        if active.is_empty() || active.iter().all(|&k| g[k].abs() <= 1e-300) {
            break;
        }
        let na = active.len();
        let max_diag = active.iter().map(|&k| a[(k, k)]).fold(0.0, f64::max);
        let mut accepted = None;
        while lambda <= MAX_DAMPING {
            let mut m = DMatrix::zeros(na, na);
            let mut rhs = DVector::zeros(na);
            for (i, &ki) in active.iter().enumerate() {
                rhs[i] = -g[ki];
                for (j, &kj) in active.iter().enumerate() {
                    m[(i, j)] = a[(ki, kj)];
                }
                m[(i, i)] += lambda * a[(ki, ki)].max(1e-12 * max_diag).max(1e-300);
            }
            let step = match m.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match m.lu().solve(&rhs) {
                    Some(s) => s,
                    None => {
                        lambda *= 4.0;
                        continue;
                    }
                },
            };
            trial.copy_from_slice(x);
            for (i, &k) in active.iter().enumerate() {
                trial[k] = (x[k] + step[i]).clamp(res.bounds[k][0], res.bounds[k][1]);
            }
            let rt = res.evaluate(&trial, None)?;
            let ft = rt.norm_squared();
            if ft < f {
                accepted = Some(ft);
                break;
            }
            lambda *= 4.0;
        }
        let Some(ft) = accepted else { break };
        let moved: f64 = x
            .iter()
            .zip(&trial)
            .map(|(a, b)| (a - b).abs() / (a.abs() + 1e-12))
            .fold(0.0, f64::max);
        let rel = (f - ft) / f;
        x.copy_from_slice(&trial);
        r = res.evaluate(x, Some(&mut jac))?;
        f = r.norm_squared();
        lambda = (lambda / 3.0).max(1e-15);
        if moved < 1e-15 || rel < 1e-16 {
            break;
        }
    }
    Ok(LocalRun { objective: f, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// First start at the template values, remaining starts random.
    Template,
    /// All starts drawn uniformly inside the bounds.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub start: Start,
    pub restarts: usize,
    /// A run is reported as converged when its objective falls below this value.
    pub tolerance: f64,
    pub seed: u64,
    pub max_iterations: usize,
}

pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 20_190_101;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            start: Start::Template,
            restarts: 1,
            tolerance: DEFAULT_TOLERANCE,
            seed: DEFAULT_SEED,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResidual {
    pub omega: f64,
    pub weight: f64,
    pub numerator: Complex64,
    /// Diagnostic `|S(ω_m)|²` of the returned configuration.
    pub reflected_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub config: SystemConfig,
    pub parameter_names: Vec<String>,
    pub parameters: Vec<f64>,
    pub objective: f64,
    pub residuals: Vec<PointResidual>,
    pub winning_restart: usize,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
}

/// Runs the multi-start optimization; never fails just because no start met
/// the tolerance (the result then carries `converged = false`).
pub fn optimize(problem: &OptimizationProblem, settings: &OptimizerSettings) -> Result<OptimizationResult> {
    problem.validate()?;
    if settings.restarts == 0 {
        return Err(Error::Problem("restarts must be >= 1".into()));
    }
    if !(settings.tolerance > 0.0) {
        return Err(Error::Problem("tolerance must be > 0".into()));
    }
    let res = Residuals::new(problem)?;
    let base = problem.base_config()?;
    let template_params = problem.params_of(&base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let mut best: Option<(usize, Vec<f64>, LocalRun)> = None;
    let mut summaries = Vec::with_capacity(settings.restarts);
    for restart in 0..settings.restarts {
        let mut x: Vec<f64> = if restart == 0 && settings.start == Start::Template {
            template_params.clone()
        } else {
            res.bounds.iter().map(|b| rng.gen_range(b[0]..=b[1])).collect()
        };
        let run = levenberg_marquardt(&res, &mut x, settings.max_iterations)?;
        log::debug!("restart {restart}: objective {:.6e} after {} iterations", run.objective, run.iterations);
        summaries.push(RestartSummary {
            restart,
            objective: run.objective,
            iterations: run.iterations,
        });
        let better = match &best {
            None => true,
            Some((_, _, b)) => run.objective < b.objective,
        };
        if better {
            best = Some((restart, x, run));
        }
    }
    let (winner, params, run) = best.expect("at least one restart");
    let config = problem.apply(&params)?;
    let objective = objective_of(&config, problem);
    let residuals = problem
        .spectral_points
        .iter()
        .map(|&w| {
            Ok(PointResidual {
                omega: w,
                weight: problem.point_weight(w),
                numerator: numerator(&config, w),
                reflected_intensity: transfer_function(&config, w)?.norm_sqr(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimizationResult {
        parameter_names: problem.parameter_names()?,
        parameters: params,
        config,
        objective,
        residuals,
        winning_restart: winner,
        iterations: run.iterations,
        converged: objective < settings.tolerance,
        seed: settings.seed,
        restarts: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn spectral_points_follow_band_edge_rule() {
        assert_eq!(default_spectral_points(2, 1.0), vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(default_spectral_points(1, 1.0), vec![0.0, 0.25]);
        let p3 = default_spectral_points(3, 1.0);
        assert_eq!(p3.len(), 6);
        for (k, w) in p3.iter().enumerate() {
            assert!((w - 0.25 * k as f64).abs() < 1e-15);
        }
        assert_eq!(default_spectral_points(2, 2.0), vec![0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn reference_objective_fixture() {
        let problem = OptimizationProblem::new(presets::reference_config()).unwrap();
        let x = problem.params_of(&problem.template).unwrap();
        let f = objective(&x, &problem).unwrap();
        // |numer|² at 0, 0.25, 0.5, 0.75 evaluated in 30-digit arithmetic.
        let pts = [2.160_083_516_103_981e-5, 8.645_879_973_332_39e-3, 1.939_238_010_748_341e-2, 1.521_407_491_672_091e-2];
        let expected = 3e6 * pts[0] + pts[1] + pts[2] + pts[3];
        assert!((f / expected - 1.0).abs() < 1e-6, "{f}");
        // The points away from the center are individually small.
        let rest: f64 = [0.25, 0.5, 0.75].iter().map(|&w| numerator(&problem.template, w).norm_sqr()).sum();
        assert!(rest < 0.05);
    }

    #[test]
    fn matched_everywhere_gives_zero() {
        // One factor vanishing at every point: only one point, the matched center.
        let cfg = presets::matched_single_cavity();
        let mut problem = OptimizationProblem::new(cfg.clone()).unwrap();
        problem.spectral_points = vec![0.0];
        assert_eq!(objective_of(&cfg, &problem), 0.0);
    }

    #[test]
    fn all_pass_objective_is_large() {
        let problem = OptimizationProblem::new(presets::all_pass_config()).unwrap();
        assert!(objective_of(&problem.template, &problem) > 1.0);
    }

    #[test]
    fn out_of_bounds_parameters_are_rejected() {
        let problem = OptimizationProblem::new(presets::reference_config()).unwrap();
        let mut x = problem.params_of(&problem.template).unwrap();
        x[0] = 7.0;
        assert!(matches!(objective(&x, &problem), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn symmetrize_rules() {
        let reference = presets::reference_config();
        assert_eq!(symmetrize(&reference).unwrap(), reference);

        let r1 = ResonatorSpec::new(1, 1.0, 0.48, 1.0, 1.0, 1.0);
        let rm = ResonatorSpec::new(-1, 1.3, 0.3, 0.7, 1.0, 1.0);
        let cfg = SystemConfig::new(vec![rm, r1], 1.0, 0.0).unwrap();
        let s = symmetrize(&cfg).unwrap();
        let m = s.resonator(-1).unwrap();
        assert_eq!(m.cavity_detuning, -0.48);
        assert_eq!(m.kappa, 1.0);
        assert_eq!(m.g_collective, 1.0);
        assert!(s.symmetric());

        let lone = SystemConfig::new(vec![r1], 1.0, 0.0).unwrap();
        assert_eq!(symmetrize(&lone), Err(Error::UnpairedIndex(1)));

        let one_sided = SystemConfig::mirrored(presets::reference_half(), 1.0, 0.0).unwrap();
        assert_eq!(symmetrize(&one_sided).unwrap(), reference);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let cfg = presets::reference_config().with_uniform_gamma(0.01).unwrap();
        for free in [FreeMask::KAPPA_FIXED, FreeMask::ALL] {
            for sym in [true, false] {
                let problem = OptimizationProblem::new(cfg.clone())
                    .unwrap()
                    .with_free(free)
                    .unwrap()
                    .with_symmetry(sym)
                    .unwrap();
                let res = Residuals::new(&problem).unwrap();
                let x = problem.params_of(&problem.base_config().unwrap()).unwrap();
                let mut jac = DMatrix::zeros(res.rows(), res.dim());
                res.evaluate(&x, Some(&mut jac)).unwrap();
                for c in 0..res.dim() {
                    let h = 1e-6;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[c] += h;
                    xm[c] -= h;
                    let fd = (res.evaluate(&xp, None).unwrap() - res.evaluate(&xm, None).unwrap()) / (2.0 * h);
                    for row in 0..res.rows() {
                        let scale = 1.0 + jac[(row, c)].abs();
                        assert!(
                            (fd[row] - jac[(row, c)]).abs() / scale < 1e-5,
                            "free {free:?} sym {sym} col {c} row {row}: {} vs {}",
                            fd[row],
                            jac[(row, c)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn apply_then_read_back() {
        let problem = OptimizationProblem::new(presets::reference_config()).unwrap().with_free(FreeMask::ALL).unwrap();
        let names = problem.parameter_names().unwrap();
        assert_eq!(
            names,
            vec![
                "spin_linewidth",
                "g_collective[1]",
                "cavity_detuning[1]",
                "kappa[1]",
                "g_collective[2]",
                "cavity_detuning[2]",
                "kappa[2]"
            ]
        );
        let x = vec![1.5, 1.7, 0.4, 3.0, 1.4, 1.2, 2.1];
        let cfg = problem.apply(&x).unwrap();
        assert!(cfg.symmetric());
        assert_eq!(cfg.resonator(-2).unwrap().cavity_detuning, -1.2);
        assert_eq!(problem.params_of(&cfg).unwrap(), x);
    }

    #[test]
    fn problem_validation() {
        let problem = OptimizationProblem::new(presets::reference_config()).unwrap();
        let none = FreeMask::from_names::<&str>(&[]).unwrap();
        assert!(problem.clone().with_free(none).is_err());
        assert!(FreeMask::from_names(&["kapa"]).is_err());
        let mut dup = problem.clone();
        dup.spectral_points = vec![0.0, 0.5, 0.5];
        assert!(dup.validate().is_err());
        let mut bad = problem.clone();
        bad.bounds.kappa = [0.0, 10.0];
        assert!(bad.validate().is_err());
        let lone = SystemConfig::new(vec![ResonatorSpec::new(1, 1.0, 0.0, 1.0, 1.0, 1.0)], 1.0, 0.0).unwrap();
        assert!(OptimizationProblem::new(lone.clone()).unwrap().with_symmetry(true).is_err());
        let settings = OptimizerSettings {
            restarts: 0,
            ..Default::default()
        };
        assert!(optimize(&problem, &settings).is_err());
    }

    #[test]
    fn optimizer_solves_single_cavity_matching() {
        // One cavity, detuning and coupling free: the optimum is exact matching.
        let r = ResonatorSpec::new(1, 2.0, 0.3, 0.6, 1.0, 1.0).with_spin_center(0.0);
        let cfg = SystemConfig::new(vec![r], 1.0, 0.0).unwrap();
        let mut problem = OptimizationProblem::new(cfg)
            .unwrap()
            .with_free(FreeMask {
                spin_linewidth: false,
                g_collective: true,
                cavity_detuning: true,
                kappa: false,
            })
            .unwrap();
        problem.spectral_points = vec![0.0];
        problem.center_constraint_weight = 1.0;
        let result = optimize(&problem, &OptimizerSettings::default()).unwrap();
        assert!(result.converged);
        assert!(result.objective < 1e-20, "{}", result.objective);
        let r = result.config.resonators()[0];
        assert!((r.g_collective - 1.0).abs() < 1e-8);
        assert!(r.cavity_detuning.abs() < 1e-8);
    }

    #[test]
    fn optimization_is_reproducible() {
        let problem = OptimizationProblem::new(presets::reference_config()).unwrap();
        let settings = OptimizerSettings {
            start: Start::Random,
            restarts: 3,
            max_iterations: 2_000,
            ..Default::default()
        };
        let a = optimize(&problem, &settings).unwrap();
        let b = optimize(&problem, &settings).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, settings.seed);
        assert!((a.objective - objective_of(&a.config, &problem)).abs() <= 1e-10 * a.objective.max(1e-300));
    }
}
