//! Per-task execution context tracked by the scheduler and engine.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Low,
    Medium,
    High,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::Low, Priority::Medium, Priority::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::Low => "low",
            Priority::Medium => "medium",
            Priority::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "low" => Some(Priority::Low),
            "medium" => Some(Priority::Medium),
            "high" => Some(Priority::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    /// Dispatched, not yet run (or restarted after a kill).
    Ready,
    Running,
    /// Running with a committed drain: wakes stop re-evaluating it until it
    /// finishes.
    Draining,
    /// Checkpointed off-chip; resuming pays the restore DMA.
    Preempted,
    Finished,
}

impl TaskState {
    pub fn is_on_chip(self) -> bool {
        matches!(self, TaskState::Running | TaskState::Draining)
    }
}

/// Position within a task's effective layer sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerCursor {
    pub layer: usize,
    pub tiles_done: u64,
}

/// One inference task's context table entry.
///
/// `time_estimated` is the scheduler-visible prediction (predicted unroll for
/// RNNs); `time_executed` counts pure execution cycles and resets to zero on
/// a kill. Token state for the token-based policies lives here too.
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub task_id: String,
    pub priority: Priority,
    pub tokens: f64,
    pub time_estimated: f64,
    pub time_executed: f64,
    pub dispatch_time: f64,
    pub cursor: LayerCursor,
    pub checkpointed_bytes: u64,
    pub state: TaskState,
    /// Cumulative idle time already converted into tokens; the next refresh
    /// adds only the increment since.
    pub idle_accounted: f64,
    /// Stable tie-break: position in dispatch order.
    pub dispatch_index: usize,
}

impl TaskContext {
    pub fn new(
        task_id: String,
        priority: Priority,
        time_estimated: f64,
        dispatch_time: f64,
        dispatch_index: usize,
    ) -> Self {
        Self {
            task_id,
            priority,
            tokens: 0.0,
            time_estimated,
            time_executed: 0.0,
            dispatch_time,
            cursor: LayerCursor::default(),
            checkpointed_bytes: 0,
            state: TaskState::Ready,
            idle_accounted: 0.0,
            dispatch_index,
        }
    }

    /// Scheduler-visible remaining work, `time_estimated - time_executed`.
    /// Can go negative when the prediction was low.
    pub fn remaining_estimate(&self) -> f64 {
        self.time_estimated - self.time_executed
    }

    /// Cumulative time spent dispatched but not executing.
    pub fn idle_time(&self, now: f64) -> f64 {
        (now - self.dispatch_time) - self.time_executed
    }
}
