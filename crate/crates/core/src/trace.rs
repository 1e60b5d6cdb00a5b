//! Simulation trace: per-task event log plus run-level bookkeeping.
//!
//! Serializes to a delimited event log, one event per line
//! (`time_cycles,task_id,event,detail`), and a per-task summary table.

use std::collections::BTreeMap;

use crate::sched::Mechanism;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Dispatch,
    Start,
    Preempt {
        mechanism: Mechanism,
        latency: f64,
        bytes: u64,
    },
    Resume {
        latency: f64,
    },
    /// A switch resolved to drain: the candidate waits out the running
    /// task's remaining network time.
    DrainWait {
        current: String,
        current_remaining: f64,
    },
    Finish,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Dispatch => "dispatch",
            EventKind::Start => "start",
            EventKind::Preempt { .. } => "preempt",
            EventKind::Resume { .. } => "resume",
            EventKind::DrainWait { .. } => "drain_wait",
            EventKind::Finish => "finish",
        }
    }

    fn detail(&self) -> String {
        match self {
            EventKind::Dispatch | EventKind::Start | EventKind::Finish => String::new(),
            EventKind::Preempt {
                mechanism,
                latency,
                bytes,
            } => format!(
                "mechanism={} latency={} bytes={}",
                mechanism.as_str(),
                fmt_cycles(*latency),
                bytes
            ),
            EventKind::Resume { latency } => format!("latency={}", fmt_cycles(*latency)),
            EventKind::DrainWait {
                current,
                current_remaining,
            } => format!(
                "current={} remaining={}",
                current,
                fmt_cycles(*current_remaining)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub task_id: String,
    pub kind: EventKind,
}

/// Per-task roll-up computed as the run progresses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskSummary {
    pub model: String,
    pub batch: u64,
    pub priority: &'static str,
    pub dispatch_time: f64,
    pub finish_time: f64,
    pub solo_cycles: f64,
    pub executed_cycles: f64,
    pub wasted_cycles: f64,
    pub preemptions: u64,
    pub kills: u64,
    pub max_checkpoint_bytes: u64,
}

impl TaskSummary {
    /// Multi-tasked completion time, dispatch to finish.
    pub fn c_multi(&self) -> f64 {
        self.finish_time - self.dispatch_time
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    /// Keyed by task id; BTreeMap keeps serialization deterministic.
    pub tasks: BTreeMap<String, TaskSummary>,
    pub warnings: Vec<String>,
    /// Total cycles the NPU spent on checkpoint/restore DMA.
    pub dma_cycles: f64,
    pub makespan: f64,
    /// Clock the run was simulated at; converts cycle columns to wall time.
    pub freq_hz: f64,
}

fn fmt_cycles(v: f64) -> String {
    // Fixed three decimals keeps files byte-stable and diff-friendly.
    format!("{v:.3}")
}

impl SimTrace {
    pub fn push(&mut self, time: f64, task_id: &str, kind: EventKind) {
        self.events.push(TraceEvent {
            time,
            task_id: task_id.to_string(),
            kind,
        });
    }

    /// Events sorted by time (stable, so same-time events keep append order).
    pub fn sorted_events(&self) -> Vec<&TraceEvent> {
        let mut evs: Vec<&TraceEvent> = self.events.iter().collect();
        evs.sort_by(|a, b| a.time.total_cmp(&b.time));
        evs
    }

    pub fn completion_time(&self, task_id: &str) -> Option<f64> {
        self.tasks.get(task_id).map(|t| t.c_multi())
    }

    /// The delimited event log.
    pub fn event_log(&self) -> String {
        let mut out = String::from("time_cycles,task_id,event,detail\n");
        for ev in self.sorted_events() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_cycles(ev.time),
                ev.task_id,
                ev.kind.name(),
                ev.kind.detail()
            ));
        }
        out
    }

    /// The per-task summary table. Cycle columns are also reported in
    /// microseconds through the run's clock.
    pub fn summary_table(&self) -> String {
        let us = |cycles: f64| {
            if self.freq_hz > 0.0 {
                cycles / self.freq_hz * 1e6
            } else {
                0.0
            }
        };
        let mut out = String::from(
            "task_id,model,batch,priority,dispatch_cycles,finish_cycles,c_multi_cycles,\
             c_multi_us,c_single_cycles,executed_cycles,wasted_cycles,preemptions,kills,\
             max_checkpoint_bytes\n",
        );
        for (id, t) in &self.tasks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                id,
                t.model,
                t.batch,
                t.priority,
                fmt_cycles(t.dispatch_time),
                fmt_cycles(t.finish_time),
                fmt_cycles(t.c_multi()),
                fmt_cycles(us(t.c_multi())),
                fmt_cycles(t.solo_cycles),
                fmt_cycles(t.executed_cycles),
                fmt_cycles(t.wasted_cycles),
                t.preemptions,
                t.kills,
                t.max_checkpoint_bytes
            ));
        }
        out
    }

    /// Sanity checks every run must satisfy: per-task events are time-ordered
    /// and each task finishes exactly once.
    pub fn validate(&self) -> Result<(), String> {
        let mut last_time: BTreeMap<&str, f64> = BTreeMap::new();
        let mut finishes: BTreeMap<&str, u32> = BTreeMap::new();
        for ev in self.sorted_events() {
            let prev = last_time.entry(&ev.task_id).or_insert(ev.time);
            if ev.time < *prev {
                return Err(format!("task {} events out of order", ev.task_id));
            }
            *prev = ev.time;
            if matches!(ev.kind, EventKind::Finish) {
                *finishes.entry(&ev.task_id).or_insert(0) += 1;
            }
        }
        for id in self.tasks.keys() {
            if finishes.get(id.as_str()).copied().unwrap_or(0) != 1 {
                return Err(format!("task {id} did not finish exactly once"));
            }
        }
        Ok(())
    }
}
