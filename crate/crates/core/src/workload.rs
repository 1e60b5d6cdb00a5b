//! Seeded multi-task workload generation and solo baselines.
//!
//! A workload draws each task's model, batch, priority, and dispatch time
//! independently and uniformly. Recurrent tasks additionally draw an input
//! sequence length from the model's profiled key set, sample the "actual"
//! unroll length from the observations for that key, and record the
//! predicted unroll alongside. Everything is reproducible from the seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::ModelLibrary;
use crate::predict::{predict_network_time, TileMode};
use crate::sched::SchedulerConfig;
use crate::task::Priority;
use crate::{Error, NpuConfig, Result};

pub const BATCH_CHOICES: [u64; 3] = [1, 4, 16];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub model: String,
    pub batch: u64,
    pub priority: Priority,
    pub dispatch_cycles: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_seq_len: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_unroll: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_unroll: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub seed: u64,
    pub window_cycles: u64,
    pub tasks: Vec<TaskSpec>,
}

impl Workload {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("workload file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("workload serializes")
    }

    /// Reject malformed workloads before simulation: unknown models, bad
    /// batch values, missing or stray sequence fields, out-of-window
    /// dispatches.
    pub fn validate(&self, library: &ModelLibrary) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            if !seen.insert(&t.id) {
                return Err(Error::Workload(format!("duplicate task id `{}`", t.id)));
            }
            let model = library.model(&t.model)?;
            if !BATCH_CHOICES.contains(&t.batch) {
                return Err(Error::Workload(format!(
                    "task {}: batch {} not in {:?}",
                    t.id, t.batch, BATCH_CHOICES
                )));
            }
            if t.dispatch_cycles > self.window_cycles {
                return Err(Error::Workload(format!(
                    "task {}: dispatch {} outside window {}",
                    t.id, t.dispatch_cycles, self.window_cycles
                )));
            }
            let seq_fields = [t.input_seq_len, t.actual_unroll, t.predicted_unroll];
            if model.family.is_recurrent() {
                if seq_fields.iter().any(Option::is_none) {
                    return Err(Error::Workload(format!(
                        "task {}: recurrent model `{}` requires input_seq_len, actual_unroll, \
                         and predicted_unroll",
                        t.id, t.model
                    )));
                }
                library.profile_for(model)?;
            } else if seq_fields.iter().any(Option::is_some) {
                return Err(Error::Workload(format!(
                    "task {}: cnn model `{}` must not carry sequence fields",
                    t.id, t.model
                )));
            }
        }
        Ok(())
    }
}

/// Draw a fresh workload. Deterministic given the seed and the library's
/// (sorted) model names.
pub fn generate(
    seed: u64,
    n_tasks: usize,
    window_cycles: u64,
    library: &ModelLibrary,
) -> Result<Workload> {
    if n_tasks == 0 {
        return Err(Error::Workload("n_tasks must be >= 1".into()));
    }
    let names = library.model_names();
    if names.is_empty() {
        return Err(Error::Workload("model library is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n_tasks);
    for i in 0..n_tasks {
        let model_name = names[rng.random_range(0..names.len())].to_string();
        let model = library.model(&model_name)?;
        let batch = BATCH_CHOICES[rng.random_range(0..BATCH_CHOICES.len())];
        let priority = Priority::ALL[rng.random_range(0..Priority::ALL.len())];
        let dispatch_cycles = if window_cycles == 0 {
            0
        } else {
            rng.random_range(0..=window_cycles)
        };
        let (input_seq_len, actual_unroll, predicted_unroll) = if model.family.is_recurrent() {
            let lut = library.profile_for(model)?;
            let keys = lut.input_lengths();
            let input = keys[rng.random_range(0..keys.len())];
            let actual = lut.sample_actual(input, &mut rng);
            let predicted = lut.predict_unroll(input);
            (Some(input), Some(actual), Some(predicted))
        } else {
            (None, None, None)
        };
        tasks.push(TaskSpec {
            id: format!("t{i}"),
            model: model_name,
            batch,
            priority,
            dispatch_cycles,
            input_seq_len,
            actual_unroll,
            predicted_unroll,
        });
    }
    let w = Workload {
        seed,
        window_cycles,
        tasks,
    };
    w.validate(library)?;
    Ok(w)
}

/// Scheduler-visible predicted time for one task, in cycles.
pub fn estimated_time(task: &TaskSpec, library: &ModelLibrary, cfg: &NpuConfig) -> Result<f64> {
    let model = library.model(&task.model)?.with_batch(task.batch)?;
    let unroll = if model.family.is_recurrent() {
        task.predicted_unroll
    } else {
        None
    };
    predict_network_time(&model, cfg, unroll, TileMode::Generalized)
}

/// Memoized ground-truth solo times keyed by `(model, batch, actual_unroll)`.
#[derive(Debug, Default)]
pub struct SoloCache {
    map: BTreeMap<(String, u64, Option<u64>), f64>,
}

impl SoloCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Isolated completion time from a singleton engine run with the task's
    /// actual unroll length.
    pub fn solo_time(
        &mut self,
        task: &TaskSpec,
        library: &ModelLibrary,
        cfg: &NpuConfig,
        sched: &SchedulerConfig,
    ) -> Result<f64> {
        let key = (task.model.clone(), task.batch, task.actual_unroll);
        if let Some(&t) = self.map.get(&key) {
            return Ok(t);
        }
        let solo_task = TaskSpec {
            id: "solo".into(),
            dispatch_cycles: 0,
            ..task.clone()
        };
        let workload = Workload {
            seed: 0,
            window_cycles: 0,
            tasks: vec![solo_task],
        };
        let trace = crate::engine::run_simulation(&workload, library, cfg, sched, None)?;
        let t = trace
            .completion_time("solo")
            .ok_or_else(|| Error::Simulation("solo run produced no completion".into()))?;
        self.map.insert(key, t);
        Ok(t)
    }

    /// Solo times for every task in a workload, keyed by task id.
    pub fn solo_map(
        &mut self,
        workload: &Workload,
        library: &ModelLibrary,
        cfg: &NpuConfig,
        sched: &SchedulerConfig,
    ) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for t in &workload.tasks {
            out.insert(t.id.clone(), self.solo_time(t, library, cfg, sched)?);
        }
        Ok(out)
    }
}
