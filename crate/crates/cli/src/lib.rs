//! `ringmem` command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ringmem_core::io::{self as rio, ConfigFile, Format, SimulationBlock};
use ringmem_core::optimize::{optimize, Start};
use ringmem_core::spectrum::{band_metrics, evaluate_spectrum, log_ratios, loss_sensitivity, uniform_grid};
use ringmem_core::timedomain::{simulate, Scheme};
use ringmem_core::{absorption_coefficient, transfer_function, Error, SystemConfig};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const REFERENCE_FIXTURE: &str = include_str!("../fixtures/reference.toml");
const ALLPASS_FIXTURE: &str = include_str!("../fixtures/allpass.toml");
const MATCHED_FIXTURE: &str = include_str!("../fixtures/matched.toml");

#[derive(Debug, Parser)]
#[command(name = "ringmem", version, about = "Cascaded ring-resonator spin-ensemble memory: spectra, optimization and time-domain checks")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate S(ω), |S|², η⁰ and η on a frequency grid.
    Spectrum(SpectrumArgs),
    /// Refine the configuration by spectral-point optimization.
    Optimize(OptimizeArgs),
    /// Integrate the equations of motion for a Gaussian input pulse.
    Simulate(SimulateArgs),
    /// Check the invariant suite on a configuration.
    Verify(VerifyArgs),
    /// Estimate the loss sensitivity ξ.
    SweepLoss(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Rk4,
    ExponentialRk4,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file, or `builtin:reference`, `builtin:allpass`, `builtin:matched`.
    #[arg(long)]
    config: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    omega_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    /// Number of starts; the first one uses the config values unless --random is given.
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw every start uniformly inside the bounds.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Where to write the optimized config (TOML).
    #[arg(long)]
    save_config: Option<PathBuf>,
    /// Band for the reported plateau statistics.
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    spins_per_ensemble: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Where to write the energy ledger (JSON); printed to stderr otherwise.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1e-4)]
    gamma_min: f64,
    #[arg(long, default_value_t = 1e-2)]
    gamma_max: f64,
    #[arg(long, default_value_t = 9)]
    gamma_points: usize,
}

/// Error carrying the exit status it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit status. Output goes to the process's stdout/stderr.
pub fn run_subcommand<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run_subcommand`], writing to the given streams.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a, out),
        Command::Optimize(a) => cmd_optimize(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
        Command::SweepLoss(a) => cmd_sweep(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn load(spec: &str) -> CliResult<ConfigFile> {
    let builtin = match spec {
        "builtin:reference" => Some(REFERENCE_FIXTURE),
        "builtin:allpass" => Some(ALLPASS_FIXTURE),
        "builtin:matched" => Some(MATCHED_FIXTURE),
        s if s.starts_with("builtin:") => {
            return Err(usage(format!("unknown builtin `{s}` (reference, allpass, matched)")));
        }
        _ => None,
    };
    Ok(match builtin {
        Some(text) => rio::parse_config(text, spec)?,
        None => rio::load_config(spec)?,
    })
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => rio::write_text(p, text)?,
        None => out.write_all(text.as_bytes()).map_err(|e| usage(format!("writing output: {e}")))?,
    }
    Ok(())
}

fn grid_for(grid: &GridArgs, default: (f64, f64, usize)) -> CliResult<Vec<f64>> {
    let lo = grid.omega_min.unwrap_or(default.0);
    let hi = grid.omega_max.unwrap_or(default.1);
    let n = grid.points.unwrap_or(default.2);
    if !(hi > lo) || n < 2 {
        return Err(usage("need --omega-min < --omega-max and --points >= 2"));
    }
    Ok(uniform_grid(lo, hi, n)?)
}

/// Default plateau band: just inside the outermost spin-line center, `±((N − ½)Δ − 0.05Δ)`.
fn plateau_band(cfg: &SystemConfig) -> (f64, f64) {
    let d = cfg.comb_spacing();
    let edge = (cfg.half_count() as f64 - 0.5) * d - 0.05 * d;
    (-edge, edge)
}

fn cmd_spectrum(a: &SpectrumArgs, out: &mut dyn Write) -> CliResult<i32> {
    let file = load(&a.common.config)?;
    let d = file.system.comb_spacing();
    let grid = grid_for(&a.grid, (-2.5 * d, 2.5 * d, 601))?;
    let spec = evaluate_spectrum(&file.system, &grid)?;
    emit(out, &a.common.out, &rio::spectrum_to_string(&spec, a.common.format.into())?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    objective: f64,
    converged: bool,
    tolerance: f64,
    seed: u64,
    winning_restart: usize,
    iterations: usize,
    parameters: Vec<(String, f64)>,
    band: [f64; 2],
    min_eta0: f64,
    max_eta0: f64,
    mean_eta0: f64,
    residuals: &'a [ringmem_core::optimize::PointResidual],
    restarts: &'a [ringmem_core::optimize::RestartSummary],
}

fn cmd_optimize(a: &OptimizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let file = load(&a.common.config)?;
    let block = file.optimization.clone().unwrap_or_default();
    let problem = block.problem(&file.system)?;
    let mut settings = block.settings();
    if let Some(r) = a.restarts {
        settings.restarts = r;
    }
    if let Some(t) = a.tol {
        settings.tolerance = t;
    }
    if let Some(s) = a.seed {
        settings.seed = s;
    }
    if let Some(m) = a.max_iterations {
        settings.max_iterations = m;
    }
    if a.random {
        settings.start = Start::Random;
    }
    let result = optimize(&problem, &settings)?;
    let band = plateau_band(&result.config);
    let grid = grid_for(&a.grid, (band.0, band.1, 601))?;
    let spec = evaluate_spectrum(&result.config, &grid)?;
    let metrics = band_metrics(&spec, [grid[0], grid[grid.len() - 1]], 0.99)?;
    let report = OptimizeReport {
        objective: result.objective,
        converged: result.converged,
        tolerance: settings.tolerance,
        seed: result.seed,
        winning_restart: result.winning_restart,
        iterations: result.iterations,
        parameters: result.parameter_names.iter().cloned().zip(result.parameters.iter().copied()).collect(),
        band: [grid[0], grid[grid.len() - 1]],
        min_eta0: metrics.min_eta0,
        max_eta0: metrics.max_eta0,
        mean_eta0: metrics.mean_eta0,
        residuals: &result.residuals,
        restarts: &result.restarts,
    };
    let optimized = ConfigFile {
        system: result.config.clone(),
        ..file
    };
    let toml = rio::config_to_string(&optimized)?;
    match &a.save_config {
        Some(p) => rio::write_text(p, &toml)?,
        None => {
            let _ = write!(err, "{toml}");
        }
    }
    let text = match a.common.format {
        FormatArg::Json => rio::to_json(&report)?,
        FormatArg::Csv => {
            let mut s = String::from("key,value\n");
            s += &format!("objective,{}\n", rio::fmt_number(report.objective));
            s += &format!("converged,{}\n", report.converged);
            s += &format!("seed,{}\n", report.seed);
            s += &format!("winning_restart,{}\n", report.winning_restart);
            for (k, v) in &report.parameters {
                s += &format!("{k},{}\n", rio::fmt_number(*v));
            }
            s += &format!("min_eta0,{}\n", rio::fmt_number(report.min_eta0));
            s += &format!("max_eta0,{}\n", rio::fmt_number(report.max_eta0));
            s += &format!("mean_eta0,{}\n", rio::fmt_number(report.mean_eta0));
            s
        }
    };
    emit(out, &a.common.out, &text)?;
    if !result.converged {
        let _ = writeln!(err, "warning: best objective {:.3e} is above the tolerance {:.3e}", result.objective, settings.tolerance);
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let file = load(&a.common.config)?;
    let block: SimulationBlock = file.simulation.unwrap_or_default();
    let pulse = block.pulse_or_default(file.system.comb_spacing());
    let mut settings = block.settings();
    if let Some(m) = a.spins_per_ensemble {
        settings.spins_per_ensemble = m;
    }
    if let Some(dt) = a.dt {
        settings.integration.dt = dt;
    }
    if let Some(t) = a.t_end {
        settings.integration.t_end = Some(t);
    }
    if let Some(s) = a.scheme {
        settings.integration.scheme = match s {
            SchemeArg::Rk4 => Scheme::Rk4,
            SchemeArg::ExponentialRk4 => Scheme::ExponentialRk4,
        };
    }
    let result = simulate(&file.system, &pulse, &settings)?;
    let indices: Vec<i32> = file.system.resonators().iter().map(|r| r.index).collect();
    emit(out, &a.common.out, &rio::series_to_string(&result, &indices, a.common.format.into())?)?;
    let ledger = rio::to_json(&result.energy_ledger)?;
    match &a.ledger {
        Some(p) => rio::write_text(p, &ledger)?,
        None => {
            let _ = write!(err, "{ledger}");
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    limit: f64,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<Check>,
    absorption_coefficients: Vec<(i32, f64)>,
}

/// Reflection threshold for the center impedance-matching check.
const CENTER_LIMIT: f64 = 1e-3;
const PASSIVITY_SLACK: f64 = 1e-12;
const SYMMETRY_SLACK: f64 = 1e-12;

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult<i32> {
    let file = load(&a.common.config)?;
    let cfg = &file.system;
    let d = cfg.comb_spacing();
    let grid = grid_for(&a.grid, (-5.0 * d, 5.0 * d, 2001))?;
    let spec = evaluate_spectrum(cfg, &grid)?;
    let mut checks = Vec::new();

    let s0 = transfer_function(cfg, 0.0)?.norm_sqr();
    checks.push(Check {
        name: "center_reflection",
        passed: s0 <= CENTER_LIMIT,
        value: s0,
        limit: CENTER_LIMIT,
        detail: "|S(0)|^2".into(),
    });

    let (worst, at) = spec
        .transfer
        .iter()
        .zip(&grid)
        .map(|(s, w)| (s.norm(), *w))
        .fold((0.0, 0.0), |m, x| if x.0 > m.0 { x } else { m });
    checks.push(Check {
        name: "passivity",
        passed: worst <= 1.0 + PASSIVITY_SLACK,
        value: worst,
        limit: 1.0 + PASSIVITY_SLACK,
        detail: format!("max |S| on the grid, at omega = {at}"),
    });

    if cfg.symmetric() {
        let mut gap: f64 = 0.0;
        for &w in &grid {
            gap = gap.max((transfer_function(cfg, -w)?.norm() - transfer_function(cfg, w)?.norm()).abs());
        }
        checks.push(Check {
            name: "mirror_symmetry",
            passed: gap <= SYMMETRY_SLACK,
            value: gap,
            limit: SYMMETRY_SLACK,
            detail: "max ||S(-w)| - |S(w)||".into(),
        });
    }

    let sum_gap = spec
        .eta0
        .iter()
        .zip(&spec.reflected_intensity)
        .map(|(e, r)| (e + r - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "efficiency_identity",
        passed: sum_gap <= 1e-12,
        value: sum_gap,
        limit: 1e-12,
        detail: "max |eta0 + |S|^2 - 1|".into(),
    });

    if let Some(lossy) = &spec.eta_lossy {
        let excess = lossy.iter().zip(&spec.eta0).map(|(l, e)| l - e).fold(f64::MIN, f64::max);
        checks.push(Check {
            name: "loss_reduces_storage",
            passed: excess <= 1e-12,
            value: excess,
            limit: 1e-12,
            detail: "max (eta - eta0)".into(),
        });
    }

    let absorption_coefficients = cfg
        .resonators()
        .iter()
        .map(|r| (r.index, absorption_coefficient(&r.spin_ensemble())))
        .collect();
    let report = VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
        absorption_coefficients,
    };
    let text = match a.common.format {
        FormatArg::Json => rio::to_json(&report)?,
        FormatArg::Csv => {
            let mut s = String::from("check,passed,value,limit\n");
            for c in &report.checks {
                s += &format!("{},{},{},{}\n", c.name, c.passed, rio::fmt_number(c.value), rio::fmt_number(c.limit));
            }
            for (i, a) in &report.absorption_coefficients {
                s += &format!("absorption[{i}],info,{},\n", rio::fmt_number(*a));
            }
            s
        }
    };
    emit(out, &a.common.out, &text)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<i32> {
    let file = load(&a.common.config)?;
    let ratios = log_ratios(a.gamma_min, a.gamma_max, a.gamma_points).map_err(|e| usage(e.to_string()))?;
    let sweep = loss_sensitivity(&file.system, &ratios)?;
    emit(out, &a.common.out, &rio::loss_table_to_string(&sweep, a.common.format.into())?)?;
    Ok(EXIT_OK)
}
