use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::optimize::{Bounds, FreeMask, OptimizationProblem, OptimizerSettings, Start};
use crate::resonator::{default_spin_center, ResonatorSpec, SystemConfig};
use crate::timedomain::{IntegrationSettings, PulseSpec, Scheme, SimulationSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonatorEntry {
    index: i32,
    kappa: f64,
    cavity_detuning: f64,
    #[serde(default)]
    gamma: f64,
    g_collective: f64,
    spin_linewidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spin_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    comb_spacing: f64,
    #[serde(default)]
    central_frequency: f64,
    #[serde(default)]
    symmetric: bool,
    #[serde(rename = "resonator", default)]
    resonators: Vec<Spanned<ResonatorEntry>>,
    optimization: Option<OptimizationBlock>,
    simulation: Option<SimulationBlock>,
}

#[derive(Debug, Serialize)]
struct ConfigDocument<'a> {
    comb_spacing: f64,
    central_frequency: f64,
    symmetric: bool,
    #[serde(rename = "resonator")]
    resonators: Vec<ResonatorEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimization: Option<&'a OptimizationBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<&'a SimulationBlock>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_collective: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_linewidth: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_detuning: Option<[f64; 2]>,
}

/// Optional `[optimization]` table; unset keys take the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Start>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enforce_symmetry: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_points: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_weight: Option<f64>,
}

impl OptimizationBlock {
    pub fn problem(&self, system: &SystemConfig) -> Result<OptimizationProblem> {
        let mut p = OptimizationProblem::new(system.clone())?;
        if let Some(free) = &self.free {
            p.free = FreeMask::from_names(free)?;
        }
        if let Some(sym) = self.enforce_symmetry {
            p.enforce_symmetry = sym;
        }
        if let Some(b) = &self.bounds {
            let d = Bounds::default_for(system.comb_spacing(), system.half_count());
            p.bounds = Bounds {
                kappa: b.kappa.unwrap_or(d.kappa),
                g_collective: b.g_collective.unwrap_or(d.g_collective),
                spin_linewidth: b.spin_linewidth.unwrap_or(d.spin_linewidth),
                cavity_detuning: b.cavity_detuning.unwrap_or(d.cavity_detuning),
            };
        }
        if let Some(pts) = &self.spectral_points {
            p.spectral_points = pts.clone();
        }
        if let Some(w) = self.center_weight {
            p.center_constraint_weight = w;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn settings(&self) -> OptimizerSettings {
        let d = OptimizerSettings::default();
        OptimizerSettings {
            start: self.start.unwrap_or(d.start),
            restarts: self.restarts.unwrap_or(d.restarts),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            seed: self.seed.unwrap_or(d.seed),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
        }
    }
}

/// Optional `[simulation]` table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spins_per_ensemble: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
}

/// Pulse used when the config specifies none: `σ_t = 8/Δ` at the carrier.
pub fn default_pulse(comb_spacing: f64) -> PulseSpec {
    PulseSpec::gaussian(8.0 / comb_spacing, 0.0)
}

impl SimulationBlock {
    pub fn pulse_or_default(&self, comb_spacing: f64) -> PulseSpec {
        self.pulse.unwrap_or_else(|| default_pulse(comb_spacing))
    }

    pub fn settings(&self) -> SimulationSettings {
        let d = SimulationSettings::default();
        SimulationSettings {
            spins_per_ensemble: self.spins_per_ensemble.unwrap_or(d.spins_per_ensemble),
            truncation: self.truncation.unwrap_or(d.truncation),
            integration: IntegrationSettings {
                dt: self.dt.unwrap_or(d.integration.dt),
                t_end: self.t_end.or(d.integration.t_end),
                scheme: self.scheme.unwrap_or(d.integration.scheme),
            },
        }
    }
}

/// A parsed configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub system: SystemConfig,
    pub optimization: Option<OptimizationBlock>,
    pub simulation: Option<SimulationBlock>,
}

impl ConfigFile {
    pub fn new(system: SystemConfig) -> Self {
        Self {
            system,
            optimization: None,
            simulation: None,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the offending key inside a resonator table, if it can be located.
fn field_line(text: &str, span: std::ops::Range<usize>, err: &Error) -> Option<usize> {
    let field = match err {
        Error::InvalidParameter { name, .. } => name.rsplit('.').next()?,
        Error::NonFinite(name) => name,
        _ => return None,
    };
    let body = text.get(span.clone())?;
    let mut offset = span.start;
    for l in body.split_inclusive('\n') {
        let key = l.trim_start().split('=').next().unwrap_or("").trim();
        if key == field {
            return Some(line_of(text, offset));
        }
        offset += l.len();
    }
    None
}

/// Parses a TOML document. `origin` names the source in error messages.
///
/// With `symmetric = true` the file may list only the positive-index half;
/// the negative half is then generated by mirroring.
pub fn parse_config(text: &str, origin: &str) -> Result<ConfigFile> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    if raw.resonators.is_empty() {
        return Err(Error::Config(format!("{origin}: no [[resonator]] entries")));
    }
    let mut specs = Vec::with_capacity(raw.resonators.len());
    for entry in &raw.resonators {
        let span = entry.span();
        let e = entry.get_ref();
        let mut r = ResonatorSpec::new(
            e.index,
            e.kappa,
            e.cavity_detuning,
            e.g_collective,
            e.spin_linewidth,
            raw.comb_spacing,
        )
        .with_gamma(e.gamma);
        r.spin_center = e.spin_center.unwrap_or_else(|| default_spin_center(e.index, raw.comb_spacing));
        r.position = e.position.unwrap_or(0.0);
        r.validate().map_err(|err| {
            let line = field_line(text, span.clone(), &err).unwrap_or_else(|| line_of(text, span.start));
            Error::Config(format!("{origin}, line {line}: {err}"))
        })?;
        specs.push(r);
    }
    let wrap = |err: Error| Error::Config(format!("{origin}: {err}"));
    let positive_only = specs.iter().all(|r| r.index > 0);
    let system = if raw.symmetric && positive_only {
        SystemConfig::mirrored(specs, raw.comb_spacing, raw.central_frequency).map_err(wrap)?
    } else {
        SystemConfig::new(specs, raw.comb_spacing, raw.central_frequency)
            .and_then(|c| c.with_symmetric_flag(raw.symmetric))
            .map_err(wrap)?
    };
    let file = ConfigFile {
        system,
        optimization: raw.optimization,
        simulation: raw.simulation,
    };
    if let Some(opt) = &file.optimization {
        opt.problem(&file.system).map_err(wrap)?;
    }
    Ok(file)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Serializes every resonator explicitly, in cascade order.
pub fn config_to_string(file: &ConfigFile) -> Result<String> {
    let sys = &file.system;
    let doc = ConfigDocument {
        comb_spacing: sys.comb_spacing(),
        central_frequency: sys.central_frequency(),
        symmetric: sys.symmetric(),
        resonators: sys
            .resonators()
            .iter()
            .map(|r| ResonatorEntry {
                index: r.index,
                kappa: r.kappa,
                cavity_detuning: r.cavity_detuning,
                gamma: r.gamma,
                g_collective: r.g_collective,
                spin_linewidth: r.spin_linewidth,
                spin_center: Some(r.spin_center),
                position: Some(r.position),
            })
            .collect(),
        optimization: file.optimization.as_ref(),
        simulation: file.simulation.as_ref(),
    };
    toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))
}

pub fn save_config(file: &ConfigFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, config_to_string(file)?).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const REFERENCE_TOML: &str = r#"
comb_spacing = 1.0
symmetric = true

[[resonator]]
index = 1
kappa = 3.27
cavity_detuning = 0.48
g_collective = 1.78
spin_linewidth = 1.8

[[resonator]]
index = 2
kappa = 2.03
cavity_detuning = 1.13
g_collective = 1.49
spin_linewidth = 1.8
"#;

    #[test]
    fn half_listing_is_mirrored() {
        let f = parse_config(REFERENCE_TOML, "reference").unwrap();
        assert_eq!(f.system, presets::reference_config());
        assert!(f.optimization.is_none());
    }

    #[test]
    fn round_trip_is_identical() {
        let mut f = parse_config(REFERENCE_TOML, "reference").unwrap();
        f.optimization = Some(OptimizationBlock {
            restarts: Some(4),
            free: Some(vec!["kappa".into(), "g_collective".into()]),
            ..Default::default()
        });
        f.simulation = Some(SimulationBlock {
            pulse: Some(PulseSpec::gaussian(8.0, 0.1)),
            dt: Some(0.02),
            ..Default::default()
        });
        let text = config_to_string(&f).unwrap();
        let g = parse_config(&text, "round-trip").unwrap();
        assert_eq!(f, g);
        assert_eq!(config_to_string(&g).unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_named() {
        let bad = REFERENCE_TOML.replace("kappa = 2.03", "kapa = 2.03");
        let err = parse_config(&bad, "typo").unwrap_err().to_string();
        assert!(err.contains("kapa"), "{err}");
        let top = format!("combspacing = 2\n{REFERENCE_TOML}");
        assert!(parse_config(&top, "typo").unwrap_err().to_string().contains("combspacing"));
    }

    #[test]
    fn invalid_values_report_line() {
        let bad = REFERENCE_TOML.replace("kappa = 2.03", "kappa = -2.03");
        let err = parse_config(&bad, "neg").unwrap_err().to_string();
        assert!(err.contains("line 14"), "{err}");
        assert!(err.contains("kappa"), "{err}");
    }

    #[test]
    fn asymmetric_full_listing_is_rejected() {
        let text = r#"
comb_spacing = 1.0
symmetric = true
[[resonator]]
index = -1
kappa = 3.0
cavity_detuning = -0.5
g_collective = 1.0
spin_linewidth = 1.0
[[resonator]]
index = 1
kappa = 3.1
cavity_detuning = 0.5
g_collective = 1.0
spin_linewidth = 1.0
"#;
        let err = parse_config(text, "asym").unwrap_err().to_string();
        assert!(err.contains("kappa"), "{err}");
        assert!(parse_config(&text.replace("symmetric = true", "symmetric = false"), "asym").is_ok());
    }

    #[test]
    fn optimization_block_overrides() {
        let text = format!("{REFERENCE_TOML}\n[optimization]\nfree = [\"kappa\"]\nspectral_points = [0.0, 0.3]\nrestarts = 5\n");
        let f = parse_config(&text, "opt").unwrap();
        let block = f.optimization.as_ref().unwrap();
        let p = block.problem(&f.system).unwrap();
        assert_eq!(p.free, FreeMask::from_names(&["kappa"]).unwrap());
        assert_eq!(p.spectral_points, vec![0.0, 0.3]);
        assert_eq!(block.settings().restarts, 5);
        let bad = format!("{REFERENCE_TOML}\n[optimization]\nfree = [\"kapa\"]\n");
        assert!(parse_config(&bad, "opt").is_err());
    }
}
