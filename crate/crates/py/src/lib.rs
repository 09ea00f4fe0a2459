//! Python bindings: build or load scenarios, run them, read the results.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tcpsim::metrics::{self, FlowSummary};
use tcpsim::scenario::{self, MeanStd, ScriptedLoss, SweepCell, SweepError};
use tcpsim::tcp;
use tcpsim::{PaperOverrides, RunResult, ScenarioConfig, SimError, TcpVariant};

create_exception!(tcpsim, ConfigError, PyValueError, "Invalid scenario configuration.");
create_exception!(
    tcpsim,
    ProtocolFault,
    PyRuntimeError,
    "A TCP endpoint hit an impossible state."
);

fn config_err(e: impl std::fmt::Display) -> PyErr {
    ConfigError::new_err(e.to_string())
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Config(c) => config_err(c),
        other => ProtocolFault::new_err(other.to_string()),
    }
}

fn variant(name: &str) -> PyResult<TcpVariant> {
    name.parse().map_err(config_err)
}

#[pyclass(name = "Config", module = "tcpsim", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    /// Parse and validate a TOML scenario document.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ScenarioConfig::from_toml_str(text).map_err(config_err)?,
        })
    }

    /// The six-node dumbbell with one FTP and one CBR flow.
    /// `scripted_losses` is a list of `(flow_id, segment_index)` pairs.
    #[staticmethod]
    #[pyo3(signature = (loss_rate=0.0, variant="reno", *, seed=None, duration_s=None, queue_capacity=None,
                        cbr_rate_bps=None, ftp_total_bytes=None, scripted_losses=None))]
    #[allow(clippy::too_many_arguments)]
    fn paper(
        loss_rate: f64,
        variant: &str,
        seed: Option<u64>,
        duration_s: Option<f64>,
        queue_capacity: Option<usize>,
        cbr_rate_bps: Option<f64>,
        ftp_total_bytes: Option<u64>,
        scripted_losses: Option<Vec<(u32, u64)>>,
    ) -> PyResult<Self> {
        let o = PaperOverrides {
            seed,
            duration_s,
            queue_capacity,
            cbr_rate_bps,
            ftp_total_bytes,
            scripted_losses: scripted_losses
                .unwrap_or_default()
                .into_iter()
                .map(|(flow, segment)| ScriptedLoss { flow, segment })
                .collect(),
            ..Default::default()
        };
        let v = self::variant(variant)?;
        Ok(Self {
            inner: scenario::build_paper_topology(loss_rate, v, &o).map_err(config_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(config_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.experiment.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.experiment.seed = seed;
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.experiment.duration_s
    }

    #[setter]
    fn set_duration_s(&mut self, d: f64) -> PyResult<()> {
        let old = self.inner.experiment.duration_s;
        self.inner.experiment.duration_s = d;
        self.inner.validate().map_err(|e| {
            self.inner.experiment.duration_s = old;
            config_err(e)
        })
    }

    /// Loss rate of the experiment's lossy link.
    fn set_loss_rate(&mut self, loss_rate: f64) -> PyResult<()> {
        self.inner.set_loss_rate(loss_rate).map_err(config_err)
    }

    /// Switches every FTP flow to `variant`.
    fn set_variant(&mut self, variant: &str) -> PyResult<()> {
        self.inner.set_variant(self::variant(variant)?);
        Ok(())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(nodes={}, links={}, ftp={}, cbr={}, duration_s={}, seed={})",
            c.topology.nodes,
            c.links.len(),
            c.flows.ftp.len(),
            c.flows.cbr.len(),
            c.experiment.duration_s,
            c.experiment.seed
        )
    }
}

fn summary_dict<'py>(py: Python<'py>, s: &FlowSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("flow_id", s.flow_id)?;
    d.set_item("generated_pkts", s.generated_pkts)?;
    d.set_item("received_pkts", s.received_pkts)?;
    d.set_item("avg_pkt_size_src", s.avg_pkt_size_src)?;
    d.set_item("avg_pkt_size_sink", s.avg_pkt_size_sink)?;
    d.set_item("throughput_bps", s.throughput_bps)?;
    d.set_item("goodput_bps", s.goodput_bps)?;
    d.set_item("completion_time_s", s.completion_time_s)?;
    d.set_item("retransmissions", s.retransmissions)?;
    d.set_item("rto_count", s.rto_count)?;
    d.set_item("dropped_queue", s.dropped_queue)?;
    d.set_item("dropped_loss", s.dropped_loss)?;
    d.set_item("rtt_avg_s", s.rtt.map(|r| r.avg))?;
    d.set_item("rtt_min_s", s.rtt.map(|r| r.min))?;
    d.set_item("rtt_max_s", s.rtt.map(|r| r.max))?;
    d.set_item("e2e_delay_avg_s", s.e2e_delay.map(|r| r.avg))?;
    Ok(d)
}

type RecordTuple = (f64, String, u32, u32, u64, u32, u64, f64);

#[pyclass(name = "RunResult", module = "tcpsim")]
struct PyRun {
    inner: RunResult,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn end_time_s(&self) -> f64 {
        self.inner.end_time_s
    }

    #[getter]
    fn in_flight_at_end(&self) -> BTreeMap<u32, u64> {
        self.inner.in_flight_at_end.clone()
    }

    #[getter]
    fn config(&self) -> PyConfig {
        PyConfig {
            inner: self.inner.config_echo.clone(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.trace.len()
    }

    /// The trace in its text form, one record per line.
    fn trace_text(&self) -> String {
        self.inner.trace.to_text()
    }

    fn summary_text(&self) -> String {
        self.inner.summary_text()
    }

    /// `(t, kind, node, flow, pkt, size, seq, aux)` tuples, optionally for one flow.
    #[pyo3(signature = (flow=None))]
    fn records(&self, flow: Option<u32>) -> Vec<RecordTuple> {
        self.inner
            .trace
            .records()
            .iter()
            .filter(|r| flow.is_none_or(|f| r.flow == f))
            .map(|r| {
                (
                    r.t,
                    r.kind.as_str().to_string(),
                    r.node,
                    r.flow,
                    r.pkt,
                    r.size,
                    r.seq,
                    r.aux,
                )
            })
            .collect()
    }

    fn summary<'py>(&self, py: Python<'py>, flow: u32) -> PyResult<Bound<'py, PyDict>> {
        let s = self
            .inner
            .summary(flow)
            .ok_or_else(|| PyKeyError::new_err(format!("no flow {flow}")))?;
        summary_dict(py, s)
    }

    fn summaries<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.summaries.iter().map(|s| summary_dict(py, s)).collect()
    }

    #[pyo3(signature = (flow, window_s=1.0))]
    fn throughput_series(&self, flow: u32, window_s: f64) -> PyResult<Vec<(f64, f64)>> {
        metrics::throughput_series(&self.inner.trace, flow, window_s, Some(self.inner.end_time_s))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn cwnd_trace(&self, flow: u32) -> Vec<(f64, f64)> {
        metrics::cwnd_trace(&self.inner.trace, flow)
    }

    /// sent = delivered + dropped + in flight, for every flow.
    fn conservation_holds(&self) -> bool {
        scenario::conservation_holds(&self.inner)
    }
}

/// Run one scenario to completion.
#[pyfunction]
fn simulate(py: Python<'_>, config: &PyConfig) -> PyResult<PyRun> {
    let cfg = config.inner.clone();
    let result = py.detach(move || scenario::run_scenario(&cfg));
    result.map(|inner| PyRun { inner }).map_err(|f| sim_err(f.error))
}

fn mean_std<'py>(py: Python<'py>, m: &MeanStd) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", m.mean)?;
    d.set_item("std", m.std)?;
    d.set_item("n", m.n)?;
    Ok(d)
}

fn cell_dict<'py>(py: Python<'py>, c: &SweepCell) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("loss_rate", c.loss_rate)?;
    d.set_item("variant", c.variant.as_str())?;
    d.set_item("runs", c.runs)?;
    d.set_item("goodput_bps", mean_std(py, &c.goodput_bps)?)?;
    d.set_item("throughput_bps", mean_std(py, &c.throughput_bps)?)?;
    d.set_item(
        "completion_s",
        c.completion_s.as_ref().map(|m| mean_std(py, m)).transpose()?,
    )?;
    d.set_item("retransmissions", mean_std(py, &c.retransmissions)?)?;
    d.set_item("rto_count", mean_std(py, &c.rto_count)?)?;
    d.set_item("generated_pkts", mean_std(py, &c.generated_pkts)?)?;
    d.set_item("received_pkts", mean_std(py, &c.received_pkts)?)?;
    Ok(d)
}

/// Every loss rate x variant x seed. Returns a dict with `rows`, `cells`,
/// and the two CSV documents the command-line sweep writes.
#[pyfunction]
fn sweep<'py>(
    py: Python<'py>,
    config: &PyConfig,
    loss_rates: Vec<f64>,
    variants: Vec<String>,
    seeds: Vec<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let variants: Vec<TcpVariant> = variants.iter().map(|v| variant(v)).collect::<PyResult<_>>()?;
    let cfg = config.inner.clone();
    let table = py
        .detach(move || scenario::run_sweep(&cfg, &loss_rates, &variants, &seeds))
        .map_err(|e| match e {
            SweepError::Runs(f) => ProtocolFault::new_err(SweepError::Runs(f).to_string()),
            other => config_err(other),
        })?;
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let d = summary_dict(py, &r.summary)?;
            d.set_item("loss_rate", r.loss_rate)?;
            d.set_item("variant", r.variant.as_str())?;
            d.set_item("seed", r.seed)?;
            d.set_item("conservation_ok", r.conservation_ok)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let cells = table
        .cells
        .iter()
        .map(|c| cell_dict(py, c))
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("rows", rows)?;
    out.set_item("cells", cells)?;
    out.set_item("rows_csv", table.rows_csv())?;
    out.set_item("summary_csv", table.summary_csv())?;
    Ok(out)
}

/// Summary of one flow from a saved trace text. Rates are averaged over
/// `duration_s`, by default the time of the last record.
#[pyfunction]
#[pyo3(signature = (trace_text, flow, total_bytes=None, duration_s=None))]
fn analyze_trace<'py>(
    py: Python<'py>,
    trace_text: &str,
    flow: u32,
    total_bytes: Option<u64>,
    duration_s: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let trace = metrics::TraceLog::parse(trace_text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let s = metrics::flow_summary(&trace, flow, duration_s.unwrap_or(trace.last_time()), total_bytes)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    summary_dict(py, &s)
}

#[pyclass(name = "RttEstimator", module = "tcpsim")]
struct PyRttEstimator {
    inner: tcp::RttEstimator,
}

#[pymethods]
impl PyRttEstimator {
    #[new]
    #[pyo3(signature = (initial_rto_s=3.0, rto_min_s=1.0, rto_max_s=64.0))]
    fn new(initial_rto_s: f64, rto_min_s: f64, rto_max_s: f64) -> Self {
        Self {
            inner: tcp::RttEstimator::new(initial_rto_s, rto_min_s, rto_max_s),
        }
    }

    /// Feeds one sample; returns `(srtt, rttvar, rto)`.
    fn update(&mut self, sample_s: f64) -> PyResult<(f64, f64, f64)> {
        self.inner
            .update(sample_s)
            .map_err(|e| ProtocolFault::new_err(e.to_string()))
    }

    #[getter]
    fn srtt(&self) -> Option<f64> {
        self.inner.srtt()
    }

    #[getter]
    fn rttvar(&self) -> f64 {
        self.inner.rttvar()
    }

    #[getter]
    fn rto(&self) -> f64 {
        self.inner.rto()
    }
}

#[pymodule(name = "tcpsim")]
fn tcpsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRun>()?;
    m.add_class::<PyRttEstimator>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_trace, m)?)?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("ProtocolFault", m.py().get_type::<ProtocolFault>())?;
    m.add("VARIANTS", TcpVariant::ALL.map(|v| v.as_str()).to_vec())?;
    Ok(())
}
