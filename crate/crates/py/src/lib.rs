//! Python bindings: scenarios, runs, sweeps and the analytic helpers.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use factory_tsn::compression;
use factory_tsn::frame::{self, ApplicationId};
use factory_tsn::metrics::AppSummary;
use factory_tsn::report;
use factory_tsn::scenario::{self, Override, PresetId, ScenarioConfig};
use factory_tsn::sim::{self, RunResult};
use factory_tsn::sweep::{self as sweeping, SweepBase};
use factory_tsn::{SimError, SimTime};

fn py_err(e: SimError) -> PyErr {
    match e {
        SimError::Config(_) | SimError::Domain(_) => PyValueError::new_err(e.to_string()),
        SimError::Runtime { .. } => PyRuntimeError::new_err(e.to_string()),
        SimError::Io { .. } => PyOSError::new_err(e.to_string()),
    }
}

fn overrides(items: &[String]) -> PyResult<Vec<Override>> {
    items.iter().map(|s| s.parse().map_err(py_err)).collect()
}

/// A validated scenario configuration.
#[pyclass(name = "Scenario", module = "factory_tsn", frozen)]
struct PyScenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    #[pyo3(signature = (name, overrides = Vec::new()))]
    fn preset(name: &str, overrides: Vec<String>) -> PyResult<Self> {
        let p: PresetId = name.parse().map_err(py_err)?;
        let cfg = scenario::expand_preset(p, &self::overrides(&overrides)?).map_err(py_err)?;
        Ok(PyScenario { cfg })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let cfg = ScenarioConfig::from_toml(text).map_err(py_err)?;
        cfg.validate().map_err(py_err)?;
        Ok(PyScenario { cfg })
    }

    fn to_toml(&self) -> String {
        self.cfg.to_toml()
    }

    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        let cfg = scenario::with_overrides(self.cfg.clone(), &self::overrides(&overrides)?).map_err(py_err)?;
        Ok(PyScenario { cfg })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    #[getter]
    fn horizon_ns(&self) -> u64 {
        self.cfg.horizon.as_nanos()
    }

    /// Runs to the horizon with the GIL released.
    fn run(&self, py: Python<'_>) -> PyResult<PyRunResult> {
        let cfg = self.cfg.clone();
        let result = py.detach(move || sim::run(&cfg)).map_err(py_err)?;
        Ok(PyRunResult {
            cfg: self.cfg.clone(),
            result,
        })
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, seed={}, horizon={})", self.cfg.name, self.cfg.seed, self.cfg.horizon)
    }
}

#[pyclass(name = "RunResult", module = "factory_tsn", frozen)]
struct PyRunResult {
    cfg: ScenarioConfig,
    result: RunResult,
}

fn summary_dict<'py>(py: Python<'py>, a: &AppSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("app", a.app.name())?;
    d.set_item("frames_sent", a.frames_sent)?;
    d.set_item("frames_received", a.frames_received)?;
    d.set_item("frames_dropped", a.frames_dropped)?;
    d.set_item("frames_in_flight", a.frames_in_flight)?;
    d.set_item("bytes_sent", a.bytes_sent)?;
    d.set_item("bytes_received", a.bytes_received)?;
    d.set_item("rdr_percent", a.rdr_percent)?;
    d.set_item("mean_delay_ms", a.mean_delay_ms)?;
    d.set_item("max_delay_ms", a.max_delay_ms)?;
    d.set_item("p99_delay_ms", a.p99_delay_ms)?;
    d.set_item("mean_network_delay_ms", a.mean_network_delay_ms)?;
    Ok(d)
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn scenario(&self) -> &str {
        &self.result.scenario
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.result.seed
    }

    #[getter]
    fn events_executed(&self) -> u64 {
        self.result.events_executed
    }

    #[getter]
    fn trace_digest(&self) -> u64 {
        self.result.trace_digest
    }

    #[getter]
    fn conservation_ok(&self) -> bool {
        self.result.conservation_ok
    }

    fn requirements_met(&self) -> bool {
        self.result.requirements_met()
    }

    /// Statistics of one application, e.g. `"AR"` or `"RemoteControl"`.
    fn app<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyDict>> {
        let app: ApplicationId = name.parse().map_err(py_err)?;
        summary_dict(py, self.result.app(app))
    }

    fn apps<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.result.apps.iter().map(|a| summary_dict(py, a)).collect()
    }

    /// `(app, rdr verdict, delay verdict)` per judged application.
    fn requirements(&self) -> Vec<(&'static str, &'static str, &'static str)> {
        self.result
            .requirements
            .iter()
            .map(|r| (r.app.name(), r.rdr.as_str(), r.delay.as_str()))
            .collect()
    }

    fn to_json(&self) -> String {
        String::from_utf8(report::report_json(&self.cfg, &self.result)).expect("json is utf-8")
    }

    fn write_reports(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        report::write_run(&dir, &self.cfg, &self.result).map_err(py_err)
    }
}

#[pyfunction]
fn presets() -> Vec<(&'static str, &'static str)> {
    PresetId::ALL.iter().map(|p| (p.name(), p.description())).collect()
}

/// One run per value of a sweepable parameter; returns `(value, RunResult)` pairs in input order.
#[pyfunction]
#[pyo3(signature = (preset, parameter, values, overrides = Vec::new()))]
fn sweep(
    py: Python<'_>,
    preset: &str,
    parameter: &str,
    values: Vec<String>,
    overrides: Vec<String>,
) -> PyResult<Vec<(String, PyRunResult)>> {
    let p: PresetId = preset.parse().map_err(py_err)?;
    let base = SweepBase::Preset(p, self::overrides(&overrides)?);
    let series = py.detach(|| sweeping::sweep(&base, parameter, &values)).map_err(py_err)?;
    series
        .rows
        .into_iter()
        .map(|row| {
            let cfg = base.point(&series.parameter, &row.value).map_err(py_err)?;
            Ok((row.value, PyRunResult { cfg, result: row.result }))
        })
        .collect()
}

#[pyfunction]
fn serialization_time_ns(size_bytes: u64, link_rate_bps: u64) -> PyResult<u64> {
    frame::serialization_time(size_bytes, link_rate_bps).map(SimTime::as_nanos).map_err(py_err)
}

#[pyfunction]
fn pcp_to_priority(pcp: u8) -> PyResult<usize> {
    frame::pcp_to_priority(pcp).map_err(py_err)
}

#[pyfunction]
fn compression_ratio(uncompressed: f64, compressed: f64) -> PyResult<f64> {
    compression::compression_ratio(uncompressed, compressed).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (width, height, ms_per_mp = 20.0))]
fn processing_delay_ns(width: u32, height: u32, ms_per_mp: f64) -> u64 {
    compression::processing_delay([width, height], ms_per_mp).as_nanos()
}

#[pyfunction]
fn psnr(max_pixel_value: f64, mse: f64) -> PyResult<f64> {
    compression::psnr(max_pixel_value, mse).map_err(py_err)
}

#[pyfunction]
fn mos_from_psnr(psnr_db: f64) -> u8 {
    compression::mos_from_psnr(psnr_db, &compression::MosThresholds::default())
}

#[pymodule]
#[pyo3(name = "factory_tsn")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(serialization_time_ns, m)?)?;
    m.add_function(wrap_pyfunction!(pcp_to_priority, m)?)?;
    m.add_function(wrap_pyfunction!(compression_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(processing_delay_ns, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(mos_from_psnr, m)?)?;
    Ok(())
}
