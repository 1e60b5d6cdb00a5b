//! Python bindings for the NPU multi-tasking simulator.
//!
//! Exposes the hardware config, the latency predictor, the sequence-length
//! lookup table, workload generation, and full simulation runs. Build with
//! `cargo build -p npusim-py`, then import the produced cdylib as
//! `npusim_py` (see python/smoke_test.py for the rename dance).

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use npusim::lut::SeqLenProfile;
use npusim::metrics::{compute_metrics, format_n, sla_violation_rate, tail_latency};
use npusim::model::{model_from_toml, ModelLibrary};
use npusim::predict::{predict_network_time, TileMode};
use npusim::sched::{MechanismMode, Policy, SchedulerConfig};
use npusim::task::Priority;
use npusim::workload::{generate, SoloCache, Workload};
use npusim::{run_simulation, NpuConfig};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// NPU hardware description; constructed with defaults or from TOML text.
#[pyclass(name = "NpuConfig", from_py_object)]
#[derive(Clone)]
struct PyNpuConfig {
    inner: NpuConfig,
}

#[pymethods]
impl PyNpuConfig {
    #[new]
    #[pyo3(signature = (toml_text=None))]
    fn new(toml_text: Option<&str>) -> PyResult<Self> {
        let inner = match toml_text {
            None => NpuConfig::default(),
            Some(text) => NpuConfig::from_toml(text).map_err(err)?,
        };
        Ok(Self { inner })
    }

    #[getter]
    fn sw(&self) -> u64 {
        self.inner.sw
    }

    #[getter]
    fn sh(&self) -> u64 {
        self.inner.sh
    }

    #[getter]
    fn freq_hz(&self) -> f64 {
        self.inner.freq_hz
    }

    /// DRAM bandwidth in bytes per cycle.
    #[getter]
    fn bw_bytes_per_cycle(&self) -> f64 {
        self.inner.bw_bytes_per_cycle()
    }

    fn cycles_to_us(&self, cycles: f64) -> f64 {
        self.inner.cycles_to_us(cycles)
    }

    fn __repr__(&self) -> String {
        format!(
            "NpuConfig(sw={}, sh={}, acc={}, freq_hz={}, bw={} B/s)",
            self.inner.sw,
            self.inner.sh,
            self.inner.acc,
            self.inner.freq_hz,
            self.inner.dram_bw_bytes_per_sec
        )
    }
}

/// The model library: the eight built-in archetypes plus anything added.
#[pyclass(name = "ModelLibrary")]
struct PyModelLibrary {
    inner: ModelLibrary,
}

#[pymethods]
impl PyModelLibrary {
    #[new]
    fn new() -> Self {
        Self {
            inner: ModelLibrary::builtin(),
        }
    }

    fn model_names(&self) -> Vec<String> {
        self.inner
            .model_names()
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    /// Add a model from TOML text (profiles it references must exist).
    fn add_model(&mut self, toml_text: &str) -> PyResult<()> {
        let model = model_from_toml(toml_text).map_err(err)?;
        self.inner.add_model(model).map_err(err)
    }

    /// Add a sequence-length profile from its delimited text format.
    fn add_profile(&mut self, text: &str) -> PyResult<()> {
        let profile = SeqLenProfile::parse(text).map_err(err)?;
        self.inner.add_profile(profile).map_err(err)
    }

    /// Predict a model's inference time. Returns a dict with cycles, us, and
    /// (for recurrent models) the predicted unroll length.
    #[pyo3(signature = (model, batch=1, input_len=None, config=None))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        model: &str,
        batch: u64,
        input_len: Option<u64>,
        config: Option<PyNpuConfig>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config.map(|c| c.inner).unwrap_or_default();
        let spec = self.inner.model(model).map_err(err)?;
        let unroll = if spec.family.is_recurrent() {
            let input_len = input_len.ok_or_else(|| {
                PyValueError::new_err(format!("model {model} requires input_len"))
            })?;
            Some(
                self.inner
                    .profile_for(spec)
                    .map_err(err)?
                    .predict_unroll(input_len),
            )
        } else {
            if input_len.is_some() {
                return Err(PyValueError::new_err(
                    "input_len is only valid for recurrent models",
                ));
            }
            None
        };
        let instance = spec.with_batch(batch).map_err(err)?;
        let cycles =
            predict_network_time(&instance, &cfg, unroll, TileMode::Generalized).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("cycles", cycles)?;
        out.set_item("us", cfg.cycles_to_us(cycles))?;
        out.set_item("predicted_unroll", unroll)?;
        Ok(out)
    }
}

/// Result of one simulation run.
#[pyclass(name = "SimResult")]
struct PySimResult {
    antt: f64,
    stp: f64,
    fairness: f64,
    sla: Vec<(String, f64)>,
    p95_high: Option<f64>,
    makespan: f64,
    per_task: Vec<(String, f64, f64)>,
    trace_csv: String,
    summary_csv: String,
    warnings: Vec<String>,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn antt(&self) -> f64 {
        self.antt
    }

    #[getter]
    fn stp(&self) -> f64 {
        self.stp
    }

    #[getter]
    fn fairness(&self) -> f64 {
        self.fairness
    }

    #[getter]
    fn makespan_cycles(&self) -> f64 {
        self.makespan
    }

    #[getter]
    fn p95_high_cycles(&self) -> Option<f64> {
        self.p95_high
    }

    /// {N: violation_rate} for the requested SLA multipliers.
    fn sla_violation_rates<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (n, rate) in &self.sla {
            out.set_item(n, rate)?;
        }
        Ok(out)
    }

    /// [(task_id, c_single, c_multi)] sorted by task id.
    fn per_task(&self) -> Vec<(String, f64, f64)> {
        self.per_task.clone()
    }

    #[getter]
    fn trace_csv(&self) -> &str {
        &self.trace_csv
    }

    #[getter]
    fn summary_csv(&self) -> &str {
        &self.summary_csv
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "SimResult(antt={:.4}, stp={:.4}, fairness={:.4}, makespan={:.0})",
            self.antt, self.stp, self.fairness, self.makespan
        )
    }
}

/// Generate a seeded workload and return it as TOML text.
#[pyfunction]
#[pyo3(signature = (seed, n_tasks, window_cycles, library=None))]
fn generate_workload(
    seed: u64,
    n_tasks: usize,
    window_cycles: u64,
    library: Option<&PyModelLibrary>,
) -> PyResult<String> {
    let builtin;
    let lib = match library {
        Some(l) => &l.inner,
        None => {
            builtin = ModelLibrary::builtin();
            &builtin
        }
    };
    let workload = generate(seed, n_tasks, window_cycles, lib).map_err(err)?;
    Ok(workload.to_toml())
}

/// Run one simulation over a workload given as TOML text.
#[pyfunction]
#[pyo3(signature = (workload_toml, policy="prema", mechanism="dynamic", period_us=250.0,
                    config=None, library=None, sla_n=None))]
fn simulate(
    workload_toml: &str,
    policy: &str,
    mechanism: &str,
    period_us: f64,
    config: Option<PyNpuConfig>,
    library: Option<&PyModelLibrary>,
    sla_n: Option<Vec<f64>>,
) -> PyResult<PySimResult> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let builtin;
    let lib = match library {
        Some(l) => &l.inner,
        None => {
            builtin = ModelLibrary::builtin();
            &builtin
        }
    };
    let policy = Policy::parse(policy)
        .ok_or_else(|| PyValueError::new_err(format!("unknown policy `{policy}`")))?;
    let mechanism = MechanismMode::parse(mechanism)
        .ok_or_else(|| PyValueError::new_err(format!("unknown mechanism `{mechanism}`")))?;
    let workload = Workload::from_toml(workload_toml).map_err(err)?;
    workload.validate(lib).map_err(err)?;
    let sched = SchedulerConfig {
        period_cycles: cfg.us_to_cycles(period_us),
        policy,
        mechanism_mode: mechanism,
        ..SchedulerConfig::default()
    };

    let mut cache = SoloCache::new();
    let solo = cache.solo_map(&workload, lib, &cfg, &sched).map_err(err)?;
    let trace = run_simulation(&workload, lib, &cfg, &sched, Some(&solo))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let weights: BTreeMap<String, f64> = workload
        .tasks
        .iter()
        .map(|t| (t.id.clone(), sched.priority_tokens(t.priority)))
        .collect();
    let report = compute_metrics(&trace, &solo, &weights).map_err(err)?;
    let sla_values = sla_n.unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0]);
    let rates = sla_violation_rate(&trace, &solo, &sla_values).map_err(err)?;
    // Keep the caller's order rather than the map's.
    let sla = sla_values
        .iter()
        .map(|n| {
            let key = format_n(*n);
            let rate = rates[&key];
            (key, rate)
        })
        .collect();
    let p95_high = tail_latency(&trace, 95.0, Some(Priority::High)).ok();
    let per_task = report
        .per_task
        .iter()
        .map(|t| (t.task_id.clone(), t.c_single, t.c_multi))
        .collect();
    Ok(PySimResult {
        antt: report.antt,
        stp: report.stp,
        fairness: report.fairness,
        sla,
        p95_high,
        makespan: trace.makespan,
        per_task,
        trace_csv: trace.event_log(),
        summary_csv: trace.summary_table(),
        warnings: trace.warnings.clone(),
    })
}

/// Predict the unroll length for an input length using a profile's LUT.
#[pyfunction]
fn predict_unroll(profile_text: &str, input_len: u64) -> PyResult<u64> {
    let profile = SeqLenProfile::parse(profile_text).map_err(err)?;
    let lut = npusim::lut::build_lut(&profile).map_err(err)?;
    Ok(lut.predict_unroll(input_len))
}

#[pymodule]
fn npusim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyNpuConfig>()?;
    m.add_class::<PyModelLibrary>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(generate_workload, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(predict_unroll, m)?)?;
    Ok(())
}
