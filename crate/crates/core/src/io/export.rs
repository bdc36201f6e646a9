use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::{EfficiencySpectrum, LossSensitivity};
use crate::timedomain::SimulationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

pub const SPECTRUM_HEADER: [&str; 6] = ["omega", "re_S", "im_S", "reflected_intensity", "eta0", "eta_lossy"];

/// Fixed 15-digit scientific notation, so identical inputs give identical bytes.
pub fn fmt_number(x: f64) -> String {
    format!("{x:.15e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub omega: f64,
    pub re_s: f64,
    pub im_s: f64,
    pub reflected_intensity: f64,
    pub eta0: f64,
    /// Equals `eta0` for lossless cascades.
    pub eta_lossy: f64,
}

pub fn spectrum_records(spec: &EfficiencySpectrum) -> Vec<SpectrumRecord> {
    (0..spec.len())
        .map(|k| SpectrumRecord {
            omega: spec.omega_grid[k],
            re_s: spec.transfer[k].re,
            im_s: spec.transfer[k].im,
            reflected_intensity: spec.reflected_intensity[k],
            eta0: spec.eta0[k],
            eta_lossy: spec.eta_lossy.as_ref().map_or(spec.eta0[k], |v| v[k]),
        })
        .collect()
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_number(*x))).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Problem(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Problem(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Problem(format!("csv: {e}"))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Problem(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn spectrum_to_string(spec: &EfficiencySpectrum, format: Format) -> Result<String> {
    let records = spectrum_records(spec);
    match format {
        Format::Csv => csv_table(
            &SPECTRUM_HEADER,
            records
                .iter()
                .map(|r| vec![r.omega, r.re_s, r.im_s, r.reflected_intensity, r.eta0, r.eta_lossy]),
        ),
        Format::Json => to_json(&records),
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn export_spectrum(spec: &EfficiencySpectrum, path: impl AsRef<Path>, format: Format) -> Result<()> {
    write_text(path, &spectrum_to_string(spec, format)?)
}

/// Time series: `t`, input and output fields, then every cavity amplitude.
pub fn series_to_string(result: &SimulationResult, indices: &[i32], format: Format) -> Result<String> {
    let mut header: Vec<String> = ["t", "re_a_in", "im_a_in", "re_a_out", "im_a_out"].map(String::from).to_vec();
    for idx in indices {
        header.push(format!("re_b[{idx}]"));
        header.push(format!("im_b[{idx}]"));
    }
    match format {
        Format::Csv => {
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = (0..result.time_grid.len()).map(|k| {
                let mut row = vec![
                    result.time_grid[k],
                    result.input_series[k].re,
                    result.input_series[k].im,
                    result.output_series[k].re,
                    result.output_series[k].im,
                ];
                for series in &result.cavity_series {
                    row.push(series[k].re);
                    row.push(series[k].im);
                }
                row
            });
            csv_table(&header, rows)
        }
        Format::Json => to_json(result),
    }
}

pub fn loss_table_to_string(sweep: &LossSensitivity, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut s = csv_table(
                &["gamma_ratio", "gamma", "eta0", "eta", "deficit"],
                sweep.points.iter().map(|p| vec![p.gamma_ratio, p.gamma, p.eta0, p.eta, p.deficit]),
            )?;
            let _ = writeln!(s, "# xi = {}", fmt_number(sweep.xi));
            Ok(s)
        }
        Format::Json => to_json(sweep),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{evaluate_spectrum, uniform_grid};
    use crate::presets;

    #[test]
    fn csv_header_and_precision() {
        let spec = evaluate_spectrum(&presets::reference_config(), &uniform_grid(-1.0, 1.0, 5).unwrap()).unwrap();
        let text = spectrum_to_string(&spec, Format::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "omega,re_S,im_S,reflected_intensity,eta0,eta_lossy");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 6);
        assert_eq!(first[0], "-1.000000000000000e0");
        let back: f64 = first[4].parse().unwrap();
        assert!((back - spec.eta0[0]).abs() <= 1e-15 * spec.eta0[0].abs());
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn exports_are_deterministic() {
        let spec = evaluate_spectrum(&presets::reference_config(), &uniform_grid(-2.0, 2.0, 41).unwrap()).unwrap();
        for f in [Format::Csv, Format::Json] {
            assert_eq!(spectrum_to_string(&spec, f).unwrap(), spectrum_to_string(&spec, f).unwrap());
        }
        let json: serde_json::Value = serde_json::from_str(&spectrum_to_string(&spec, Format::Json).unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 41);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
