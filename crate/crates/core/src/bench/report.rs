//! Per-configuration report rows and their CSV / JSON encodings.
//!
//! CSV columns: `scenario,config_idx,model,dof,iterations,time_s,
//! e_r_int_pct,e_r_max_pct,e_x_int,e_x_max,converged`. JSON carries the same
//! rows plus `error_curve` and `markers`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ErrorSample, ErrorSummary, MarkerErrors, MarkerSet};
use crate::rod::RodShape;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerRow {
    pub i: usize,
    pub tau: f64,
    pub e_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub config_idx: usize,
    pub model: String,
    pub dof: usize,
    pub iterations: usize,
    pub time_s: f64,
    #[serde(with = "nan_as_null")]
    pub e_r_int_pct: f64,
    #[serde(with = "nan_as_null")]
    pub e_r_max_pct: f64,
    #[serde(with = "nan_as_null")]
    pub e_x_int: f64,
    #[serde(with = "nan_as_null")]
    pub e_x_max: f64,
    pub converged: bool,
    #[serde(default, with = "nan_as_null")]
    pub residual: f64,
    #[serde(default)]
    pub gravity: bool,
    #[serde(default)]
    pub failure: Option<String>,
    #[serde(default)]
    pub error_curve: Vec<ErrorSample>,
    #[serde(default)]
    pub markers: Vec<MarkerRow>,
}

/// JSON has no NaN; unavailable metrics are written as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: &'a str,
    config_idx: usize,
    model: &'a str,
    dof: usize,
    iterations: usize,
    time_s: f64,
    e_r_int_pct: f64,
    e_r_max_pct: f64,
    e_x_int: f64,
    e_x_max: f64,
    converged: bool,
}

pub const CSV_HEADER: &str = "scenario,config_idx,model,dof,iterations,time_s,e_r_int_pct,e_r_max_pct,e_x_int,e_x_max,converged";

impl ReportRow {
    pub fn new(scenario: &str, config_idx: usize, model: &str, dof: usize) -> Self {
        Self {
            scenario: scenario.into(),
            config_idx,
            model: model.into(),
            dof,
            iterations: 0,
            time_s: 0.0,
            e_r_int_pct: f64::NAN,
            e_r_max_pct: f64::NAN,
            e_x_int: f64::NAN,
            e_x_max: f64::NAN,
            converged: false,
            residual: f64::NAN,
            gravity: false,
            failure: None,
            error_curve: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn fill_success(&mut self, shape: &RodShape, time: f64, summary: &ErrorSummary) {
        self.iterations = shape.diagnostics.iterations;
        self.residual = shape.diagnostics.residual_norm;
        self.converged = shape.diagnostics.converged;
        self.time_s = time;
        self.e_r_int_pct = summary.e_r_int_pct;
        self.e_r_max_pct = summary.e_r_max_pct;
        self.e_x_int = summary.e_x_int;
        self.e_x_max = summary.e_x_max;
    }

    pub fn set_markers(&mut self, errors: &MarkerErrors, markers: &MarkerSet) {
        self.markers = errors
            .per_marker
            .iter()
            .zip(&markers.taus)
            .enumerate()
            .map(|(i, (&e, &tau))| MarkerRow { i, tau, e_mm: e * 1e3 })
            .collect();
    }

    pub fn marker_mean_mm(&self) -> Option<f64> {
        (!self.markers.is_empty()).then(|| self.markers.iter().map(|m| m.e_mm).sum::<f64>() / self.markers.len() as f64)
    }
}

/// Per-model aggregate over a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub model: String,
    pub configs: usize,
    pub converged: usize,
    pub mean_e_r_int_pct: f64,
    pub max_e_r_max_pct: f64,
    pub mean_time_s: f64,
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }

    pub fn rows_for<'a>(&'a self, scenario: &'a str, model: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.scenario == scenario && r.model == model)
    }

    /// Aggregates in order of first appearance; averages over converged rows.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.scenario.clone(), r.model.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(scenario, model)| {
                let rows: Vec<&ReportRow> = self.rows_for(&scenario, &model).collect();
                let ok: Vec<&&ReportRow> = rows.iter().filter(|r| r.converged).collect();
                let mean = |f: &dyn Fn(&ReportRow) -> f64| {
                    if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                    }
                };
                Aggregate {
                    configs: rows.len(),
                    converged: ok.len(),
                    mean_e_r_int_pct: mean(&|r| r.e_r_int_pct),
                    max_e_r_max_pct: ok.iter().map(|r| r.e_r_max_pct).fold(f64::NAN, f64::max),
                    mean_time_s: mean(&|r| r.time_s),
                    mean_iterations: mean(&|r| r.iterations as f64),
                    scenario,
                    model,
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Config(e.to_string()))?;
        for r in &self.rows {
            w.serialize(CsvRow {
                scenario: &r.scenario,
                config_idx: r.config_idx,
                model: &r.model,
                dof: r.dof,
                iterations: r.iterations,
                time_s: r.time_s,
                e_r_int_pct: r.e_r_int_pct,
                e_r_max_pct: r.e_r_max_pct,
                e_x_int: r.e_x_int,
                e_x_max: r.e_x_max,
                converged: r.converged,
            })
            .map_err(|e| Error::Config(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn emit(&self, path: &Path, format: ReportFormat) -> Result<()> {
        let text = match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}
