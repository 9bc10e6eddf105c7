use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::ExcitationReport;
use crate::harness::config::ScenarioConfig;
use crate::netbus::{Delivery, Direction, MinislotReport, Mode, SwitchLog};

/// Trace schema version; bump when the column set changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 17] = [
    "app",
    "k",
    "mode",
    "y",
    "yref",
    "yref_prime",
    "e",
    "u",
    "delay",
    "v",
    "dv",
    "phi_err",
    "rank",
    "orth_residual",
    "switch",
    "disturbance",
    "theta_norm",
];

/// One sample of one application. Field order matches [`CSV_HEADER`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub app: usize,
    pub k: u64,
    pub mode: Mode,
    pub y: f64,
    pub yref: f64,
    pub yref_prime: f64,
    pub e: f64,
    /// Command computed at `k`.
    pub u: f64,
    pub delay: usize,
    pub v: Option<f64>,
    pub dv: Option<f64>,
    pub phi_err: Option<f64>,
    pub rank: Option<usize>,
    pub orth_residual: Option<f64>,
    pub switch: Option<Direction>,
    pub disturbance: f64,
    pub theta_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSummary {
    pub mode: Mode,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub alpha_hat: f64,
}

impl ExcitationSummary {
    pub fn from_report(mode: Mode, r: &ExcitationReport) -> Self {
        Self {
            mode,
            rank: r.rank,
            singular_values: r.singular_values.clone(),
            alpha_hat: r.alpha_hat,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppTrace {
    pub app: usize,
    pub rows: Vec<TraceRow>,
    pub switch_log: SwitchLog,
    pub excitation: Option<ExcitationSummary>,
}

/// What the bus carried in one communication cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusCycleRecord {
    pub cycle: u64,
    /// Static-segment messages, delay 1 each.
    pub static_delivered: Vec<Delivery>,
    pub dynamic: MinislotReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppSummary {
    pub app: usize,
    pub max_abs_y: f64,
    pub max_abs_u: f64,
    pub max_theta_norm: f64,
    pub switch_count: usize,
    /// First sample from which `|e|` stays below the tracking tolerance.
    pub settling_sample: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub horizon: u64,
    pub apps: Vec<AppSummary>,
    /// Diagnostic when the run stopped early.
    pub aborted: Option<String>,
}

impl Summary {
    pub fn build(apps: &[AppTrace], horizon: u64, tracking_tol: f64, aborted: Option<String>) -> Self {
        let apps = apps
            .iter()
            .map(|a| {
                let fold = |f: fn(&TraceRow) -> f64| a.rows.iter().map(f).fold(0.0, f64::max);
                let settling_sample = match a.rows.iter().rposition(|r| r.e.is_nan() || r.e.abs() >= tracking_tol) {
                    None => a.rows.first().map(|r| r.k),
                    Some(i) => a.rows.get(i + 1).map(|r| r.k),
                };
                AppSummary {
                    app: a.app,
                    max_abs_y: fold(|r| r.y.abs()),
                    max_abs_u: fold(|r| r.u.abs()),
                    max_theta_norm: fold(|r| r.theta_norm),
                    switch_count: a.rows.iter().filter(|r| r.switch.is_some()).count(),
                    settling_sample,
                }
            })
            .collect();
        Self {
            horizon,
            apps,
            aborted,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub apps: Vec<AppTrace>,
    pub bus_log: Vec<BusCycleRecord>,
    pub summary: Summary,
}

impl Trace {
    /// Rebuilds a trace from CSV rows; the bus log is not part of the CSV
    /// schema and stays empty.
    pub fn from_rows(config: ScenarioConfig, rows: Vec<TraceRow>) -> Result<Self> {
        let apps = group_rows(rows)?;
        let summary = Summary::build(&apps, config.horizon, config.tolerances.tracking, None);
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            config,
            apps,
            bus_log: Vec::new(),
            summary,
        })
    }

    /// All rows, application-major.
    pub fn rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.apps.iter().flat_map(|a| a.rows.iter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(TraceFormat::Csv),
            "json" => Some(TraceFormat::Json),
            _ => None,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_csv<'a, W: Write>(rows: impl IntoIterator<Item = &'a TraceRow>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let parse = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(CSV_HEADER).map_err(parse)?;
    for row in rows {
        w.serialize(row).map_err(parse)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!(
            "unexpected trace header {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            CSV_HEADER
        )));
    }
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Parse(format!("trace line {line}: {e}"))
            })
        })
        .collect()
}

pub fn to_csv_string(trace: &Trace) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(trace.rows(), &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn to_json_string(trace: &Trace) -> Result<String> {
    serde_json::to_string_pretty(trace).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_json_str(text: &str) -> Result<Trace> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))
}

pub fn export_trace(trace: &Trace, path: &Path, format: TraceFormat) -> Result<()> {
    let text = match format {
        TraceFormat::Csv => to_csv_string(trace)?,
        TraceFormat::Json => to_json_string(trace)?,
    };
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// A trace read back from disk. CSV files carry rows only.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedTrace {
    Rows(Vec<TraceRow>),
    Full(Box<Trace>),
}

pub fn load_trace(path: &Path) -> Result<LoadedTrace> {
    let format = TraceFormat::from_path(path)
        .ok_or_else(|| Error::Parse(format!("{}: expected a .csv or .json trace", path.display())))?;
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match format {
        TraceFormat::Csv => Ok(LoadedTrace::Rows(read_csv(text.as_bytes())?)),
        TraceFormat::Json => Ok(LoadedTrace::Full(Box::new(from_json_str(&text)?))),
    }
}

/// Splits application-major rows back into per-application traces and
/// rebuilds the switch logs from the switch column.
pub fn group_rows(rows: Vec<TraceRow>) -> Result<Vec<AppTrace>> {
    let mut apps: Vec<AppTrace> = Vec::new();
    for row in rows {
        let idx = row.app;
        if idx >= apps.len() {
            apps.extend((apps.len()..=idx).map(|app| AppTrace {
                app,
                ..Default::default()
            }));
        }
        if let Some(dir) = row.switch {
            apps[idx].switch_log.record_switch(row.k, dir)?;
        }
        apps[idx].rows.push(row);
    }
    Ok(apps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: u64, y: f64) -> TraceRow {
        TraceRow {
            app: 0,
            k,
            mode: Mode::Tt,
            y,
            yref: 0.1,
            yref_prime: 0.1,
            e: y - 0.1,
            u: 1.0 / 3.0,
            delay: 1,
            v: None,
            dv: Some(-1e-300),
            phi_err: None,
            rank: Some(2),
            orth_residual: None,
            switch: (k == 1).then_some(Direction::TtToEt),
            disturbance: 0.0,
            theta_norm: std::f64::consts::PI,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![row(0, 0.1 + 0.2), row(1, -7.0e-17), row(2, 1.0e300)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains(",TT->ET,"));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), rows);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn settling_sample() {
        let app = AppTrace {
            rows: vec![row(0, 1.0), row(1, 0.1), row(2, 0.1)],
            ..Default::default()
        };
        let s = Summary::build(&[app], 3, 1e-3, None);
        assert_eq!(s.apps[0].settling_sample, Some(1));
        assert_eq!(s.apps[0].switch_count, 1);
    }
}
