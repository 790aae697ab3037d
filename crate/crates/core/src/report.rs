//! Report files: delimited rows for tables and one structured JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Result, SimError};
use crate::frame::ApplicationId;
use crate::scenario::ScenarioConfig;
use crate::sim::RunResult;
use crate::sweep::Series;

pub const APP_STATS_CSV: &str = "app_stats.csv";
pub const REQUIREMENTS_CSV: &str = "requirements.csv";
pub const PORTS_CSV: &str = "ports.csv";
pub const TIMESERIES_CSV: &str = "port_timeseries.csv";
pub const REPORT_JSON: &str = "report.json";
pub const SERIES_CSV: &str = "series.csv";
pub const SERIES_JSON: &str = "series.json";

#[derive(Serialize)]
struct Document<'a> {
    config: &'a ScenarioConfig,
    result: &'a RunResult,
}

#[derive(Serialize)]
struct RequirementLine<'a> {
    app: &'a str,
    max_latency_ms: f64,
    min_rdr_percent: f64,
    rdr: &'a str,
    delay: &'a str,
    passed: bool,
}

#[derive(Serialize)]
struct SampleLine<'a> {
    time_ms: f64,
    port: &'a str,
    occupancy: usize,
    drops: u64,
    frames_sent: u64,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|e| SimError::io(&path, e))?;
    Ok(path)
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn app_stats_csv(r: &RunResult) -> Vec<u8> {
    csv_bytes(&r.apps)
}

pub fn requirements_csv(cfg: &ScenarioConfig, r: &RunResult) -> Vec<u8> {
    csv_bytes(r.requirements.iter().zip(&cfg.requirements.apps).map(|(row, spec)| RequirementLine {
        app: row.app.name(),
        max_latency_ms: spec.max_latency.as_millis_f64(),
        min_rdr_percent: spec.min_rdr_percent,
        rdr: row.rdr.as_str(),
        delay: row.delay.as_str(),
        passed: row.passed(),
    }))
}

pub fn ports_csv(r: &RunResult) -> Vec<u8> {
    csv_bytes(&r.ports)
}

pub fn timeseries_csv(r: &RunResult) -> Vec<u8> {
    csv_bytes(r.samples.iter().map(|s| SampleLine {
        time_ms: s.time.as_millis_f64(),
        port: &s.port,
        occupancy: s.occupancy,
        drops: s.drops,
        frames_sent: s.frames_sent,
    }))
}

pub fn report_json(cfg: &ScenarioConfig, r: &RunResult) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&Document { config: cfg, result: r }).expect("report serializes");
    out.push(b'\n');
    out
}

/// Writes the five run files into `dir`, creating it if needed.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, r: &RunResult) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    Ok(vec![
        write_file(dir.join(APP_STATS_CSV), &app_stats_csv(r))?,
        write_file(dir.join(REQUIREMENTS_CSV), &requirements_csv(cfg, r))?,
        write_file(dir.join(PORTS_CSV), &ports_csv(r))?,
        write_file(dir.join(TIMESERIES_CSV), &timeseries_csv(r))?,
        write_file(dir.join(REPORT_JSON), &report_json(cfg, r))?,
    ])
}

/// One row per sweep value; per main application its RDR and delays.
pub fn series_csv(s: &Series) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["parameter".to_string(), "value".into(), "requirements_met".into()];
    for app in ApplicationId::MAIN {
        for m in ["rdr_percent", "mean_delay_ms", "max_delay_ms"] {
            header.push(format!("{}_{m}", app.name()));
        }
    }
    w.write_record(&header).expect("in-memory csv write");
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for row in &s.rows {
        let mut rec = vec![s.parameter.clone(), row.value.clone(), row.result.requirements_met().to_string()];
        for app in ApplicationId::MAIN {
            let a = row.result.app(app);
            rec.extend([opt(a.rdr_percent), opt(a.mean_delay_ms), opt(a.max_delay_ms)]);
        }
        w.write_record(&rec).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

#[derive(Serialize)]
struct SeriesPoint<'a> {
    value: &'a str,
    requirements_met: bool,
    apps: &'a [crate::metrics::AppSummary],
    requirements: &'a [crate::metrics::RequirementRow],
}

pub fn series_json(s: &Series) -> Vec<u8> {
    let points: Vec<SeriesPoint> = s
        .rows
        .iter()
        .map(|r| SeriesPoint {
            value: &r.value,
            requirements_met: r.result.requirements_met(),
            apps: &r.result.apps,
            requirements: &r.result.requirements,
        })
        .collect();
    let doc = serde_json::json!({
        "scenario": s.scenario,
        "parameter": s.parameter,
        "points": points,
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("series serializes");
    out.push(b'\n');
    out
}

pub fn write_series(dir: &Path, s: &Series) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    Ok(vec![
        write_file(dir.join(SERIES_CSV), &series_csv(s))?,
        write_file(dir.join(SERIES_JSON), &series_json(s))?,
    ])
}

/// A per-application metric that differs between two reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Difference {
    pub app: String,
    pub metric: String,
    pub left: Value,
    pub right: Value,
}

pub fn load_report(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SimError::config(format!("{}: not a report: {e}", path.display())))
}

/// Compares the application tables of two `report.json` documents.
pub fn compare_reports(left: &Value, right: &Value) -> Result<Vec<Difference>> {
    let apps = |v: &Value| -> Result<Vec<Value>> {
        v.pointer("/result/apps")
            .and_then(Value::as_array)
            .cloned()
            .ok_or_else(|| SimError::config("report has no result.apps table"))
    };
    let (l, r) = (apps(left)?, apps(right)?);
    let mut out = Vec::new();
    for app in ApplicationId::ALL {
        let find = |t: &[Value]| t.iter().find(|a| a["app"] == app.name()).cloned().unwrap_or(Value::Null);
        let (a, b) = (find(&l), find(&r));
        let keys: Vec<String> = match (a.as_object(), b.as_object()) {
            (Some(x), _) => x.keys().cloned().collect(),
            (None, Some(y)) => y.keys().cloned().collect(),
            (None, None) => continue,
        };
        for k in keys {
            if a[&k] != b[&k] {
                out.push(Difference {
                    app: app.name().into(),
                    left: a[&k].clone(),
                    right: b[&k].clone(),
                    metric: k,
                });
            }
        }
    }
    Ok(out)
}
