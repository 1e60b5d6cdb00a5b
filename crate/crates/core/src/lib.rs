//! Deterministic event-driven simulator of a preemptible systolic-array NPU
//! running multiple co-scheduled DNN inference tasks.
//!
//! The crate is organized around the lifecycle of a simulation:
//!
//! * [`config`] — NPU hardware description and derived bandwidth figures.
//! * [`model`] — layer geometry, CONV-to-GEMM lowering, model files.
//! * [`predict`] — closed-form tiled-GEMM latency predictor.
//! * [`oracle`] — tile-level double-buffered pipeline used to validate the
//!   closed form independently.
//! * [`lut`] — profile-driven lookup table predicting RNN unroll lengths.
//! * [`workload`] — seeded multi-task workload generation and solo baselines.
//! * [`sched`] — scheduling policies and the preemption-mechanism selector.
//! * [`engine`] — the event loop that advances tasks tile by tile and
//!   services preemptions.
//! * [`trace`] — per-task event log produced by the engine.
//! * [`metrics`] — ANTT / STP / fairness / SLA / tail-latency reporting.

pub mod config;
pub mod engine;
pub mod lut;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod predict;
pub mod sched;
pub mod task;
pub mod trace;
pub mod workload;

pub use config::NpuConfig;
pub use engine::run_simulation;
pub use lut::{SeqLenLut, SeqLenProfile};
pub use metrics::MetricsReport;
pub use model::{LayerKind, LayerSpec, ModelFamily, ModelLibrary, ModelSpec};
pub use predict::{predict_layer_time, predict_network_time, tile_counts, TileBreakdown, TileMode};
pub use sched::{Mechanism, MechanismMode, Policy, SchedulerConfig};
pub use task::{Priority, TaskContext, TaskState};
pub use trace::SimTrace;
pub use workload::Workload;

/// Errors surfaced by validation, parsing, and simulation setup.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("model `{model}`: {msg}")]
    Model { model: String, msg: String },
    #[error("workload: {0}")]
    Workload(String),
    #[error("profile: {0}")]
    Profile(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
