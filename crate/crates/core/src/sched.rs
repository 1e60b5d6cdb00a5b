//! Scheduling policies and the preemption-mechanism selector.
//!
//! The token-based policies assign each task an initial token grant equal to
//! its priority weight and top tokens up every scheduling period in
//! proportion to priority times the normalized slowdown the task experienced
//! while waiting. Candidacy is gated by a threshold derived from the largest
//! token balance in the queue, rounded down to the closest priority level.

use serde::{Deserialize, Serialize};

use crate::task::{Priority, TaskContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Non-preemptive first-come first-serve.
    Fcfs,
    /// Rotate among ready tasks at each quantum expiry.
    Rr,
    /// Preemptive highest-priority first, FCFS within a level.
    Hpf,
    /// Token gating, FCFS among candidates.
    Token,
    /// Shortest estimated remaining work over the whole queue.
    Sejf,
    /// Shortest actual remaining work (ground-truth solo times).
    SjfOracle,
    /// Token gating, shortest estimated remaining work among candidates.
    Prema,
}

impl Policy {
    pub const ALL: [Policy; 7] = [
        Policy::Fcfs,
        Policy::Rr,
        Policy::Hpf,
        Policy::Token,
        Policy::Sejf,
        Policy::SjfOracle,
        Policy::Prema,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Fcfs => "fcfs",
            Policy::Rr => "rr",
            Policy::Hpf => "hpf",
            Policy::Token => "token",
            Policy::Sejf => "sejf",
            Policy::SjfOracle => "sjf-oracle",
            Policy::Prema => "prema",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Policy::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// Whether the policy reconsiders the running task outside quantum
    /// expiries (i.e. on dispatch wakes).
    pub fn preempts_on_dispatch(self) -> bool {
        !matches!(self, Policy::Fcfs | Policy::Rr)
    }

    pub fn uses_tokens(self) -> bool {
        matches!(self, Policy::Token | Policy::Prema)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismMode {
    StaticCheckpoint,
    StaticKill,
    Dynamic,
}

impl MechanismMode {
    pub const ALL: [MechanismMode; 3] = [
        MechanismMode::StaticCheckpoint,
        MechanismMode::StaticKill,
        MechanismMode::Dynamic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismMode::StaticCheckpoint => "checkpoint",
            MechanismMode::StaticKill => "kill",
            MechanismMode::Dynamic => "dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MechanismMode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// What happens to the running task when the scheduler switches away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Checkpoint,
    Kill,
    Drain,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Checkpoint => "checkpoint",
            Mechanism::Kill => "kill",
            Mechanism::Drain => "drain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Scheduling period time-quota, in cycles (0.25 ms at 700 MHz).
    pub period_cycles: f64,
    pub tokens_low: f64,
    pub tokens_medium: f64,
    pub tokens_high: f64,
    pub policy: Policy,
    pub mechanism_mode: MechanismMode,
    /// Experimental: subtract the threshold from a task's tokens when it is
    /// scheduled. Off by default; tokens are otherwise never consumed.
    #[serde(default)]
    pub debit_tokens_on_schedule: bool,
    /// Re-add the full cumulative slowdown at every refresh instead of only
    /// the increment accrued since the last one.
    #[serde(default = "default_true")]
    pub cumulative_token_refresh: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            period_cycles: 175_000.0, // 0.25 ms * 700 MHz
            tokens_low: 1.0,
            tokens_medium: 3.0,
            tokens_high: 9.0,
            policy: Policy::Prema,
            mechanism_mode: MechanismMode::Dynamic,
            debit_tokens_on_schedule: false,
            cumulative_token_refresh: true,
        }
    }
}

impl SchedulerConfig {
    pub fn priority_tokens(&self, p: Priority) -> f64 {
        match p {
            Priority::Low => self.tokens_low,
            Priority::Medium => self.tokens_medium,
            Priority::High => self.tokens_high,
        }
    }

    /// Distinct token levels, ascending (the threshold lattice).
    pub fn token_levels(&self) -> Vec<f64> {
        let mut levels = vec![self.tokens_low, self.tokens_medium, self.tokens_high];
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        levels
    }
}

/// Grant a newly dispatched task its initial tokens.
pub fn init_tokens(task: &mut TaskContext, cfg: &SchedulerConfig) {
    task.tokens = cfg.priority_tokens(task.priority);
}

/// Slowdown experienced so far: time left idle in the queue relative to the
/// task's predicted isolated time.
pub fn slowdown_normalized(task: &TaskContext, now: f64) -> f64 {
    task.idle_time(now) / task.time_estimated
}

/// Periodic token top-up. Accrual is incremental: only idle time that has not
/// been converted to tokens yet counts, so a task that ran the whole period
/// gains nothing.
pub fn refresh_tokens<'a>(
    tasks: impl Iterator<Item = &'a mut TaskContext>,
    now: f64,
    cfg: &SchedulerConfig,
) {
    for task in tasks {
        let idle = task.idle_time(now);
        if cfg.cumulative_token_refresh {
            // Re-add the whole slowdown each period: a task that keeps
            // waiting accumulates tokens superlinearly, which is what lets
            // short low-priority tasks break through the threshold.
            let slowdown = idle / task.time_estimated;
            if slowdown > 0.0 && idle - task.idle_accounted > 0.0 {
                task.tokens += cfg.priority_tokens(task.priority) * slowdown;
                task.idle_accounted = idle;
            }
        } else {
            let increment = (idle - task.idle_accounted).max(0.0);
            if increment > 0.0 {
                task.tokens +=
                    cfg.priority_tokens(task.priority) * increment / task.time_estimated;
                task.idle_accounted = idle;
            }
        }
    }
}

/// Candidacy threshold: the largest priority-level token value that does not
/// exceed the queue's maximum token balance (at least the lowest level).
pub fn prema_threshold<'a>(
    queued: impl Iterator<Item = &'a TaskContext>,
    cfg: &SchedulerConfig,
) -> f64 {
    let max_tokens = queued.map(|t| t.tokens).fold(f64::NEG_INFINITY, f64::max);
    let levels = cfg.token_levels();
    let mut threshold = levels[0];
    for &level in &levels {
        if level <= max_tokens {
            threshold = level;
        }
    }
    threshold
}

/// Why the scheduler woke up; some policies only act on quantum expiries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WakeReason {
    /// A new task was dispatched while another runs.
    Dispatch,
    /// The running task's period quota expired.
    QuantumExpiry,
    /// The NPU is free (a task finished, or nothing was running).
    Free,
}

/// Pick the next task to run among `queued` (indices into `tasks`).
///
/// `running` is the currently executing task, if any; `rr_cursor` is the
/// dispatch index the round-robin rotation last served. `actual_total` gives
/// each task's ground-truth solo cycles for the oracle policy; other policies
/// never read it. Ties always break toward earlier dispatch.
#[allow(clippy::too_many_arguments)]
pub fn select_candidate(
    tasks: &[TaskContext],
    queued: &[usize],
    policy: Policy,
    reason: WakeReason,
    running: Option<usize>,
    rr_cursor: usize,
    actual_total: &[f64],
    cfg: &SchedulerConfig,
) -> usize {
    assert!(!queued.is_empty(), "select on empty queue");

    // Policies that only rotate on quantum expiry keep the running task
    // otherwise.
    if let Some(r) = running {
        if reason == WakeReason::Dispatch && !policy.preempts_on_dispatch() {
            return r;
        }
        if policy == Policy::Rr && reason != WakeReason::QuantumExpiry {
            return r;
        }
    }

    let dispatch_cmp = |a: usize, b: usize| {
        tasks[a]
            .dispatch_time
            .total_cmp(&tasks[b].dispatch_time)
            .then(tasks[a].dispatch_index.cmp(&tasks[b].dispatch_index))
    };
    let earliest = |ids: &[usize]| -> usize {
        ids.iter().copied().min_by(|&a, &b| dispatch_cmp(a, b)).unwrap()
    };
    let shortest = |ids: &[usize], remaining: &dyn Fn(usize) -> f64| -> usize {
        ids.iter()
            .copied()
            .min_by(|&a, &b| remaining(a).total_cmp(&remaining(b)).then(dispatch_cmp(a, b)))
            .unwrap()
    };

    match policy {
        Policy::Fcfs => earliest(queued),
        Policy::Hpf => {
            let top = queued
                .iter()
                .map(|&i| tasks[i].priority)
                .max()
                .expect("non-empty");
            let level: Vec<usize> = queued
                .iter()
                .copied()
                .filter(|&i| tasks[i].priority == top)
                .collect();
            earliest(&level)
        }
        Policy::Rr => {
            // Next ready task after the cursor in dispatch order, wrapping.
            let mut ordered: Vec<usize> = queued.to_vec();
            ordered.sort_by_key(|&i| tasks[i].dispatch_index);
            *ordered
                .iter()
                .find(|&&i| tasks[i].dispatch_index > rr_cursor)
                .unwrap_or(&ordered[0])
        }
        Policy::Sejf => shortest(queued, &|i| tasks[i].remaining_estimate()),
        Policy::SjfOracle => shortest(queued, &|i| actual_total[i] - tasks[i].time_executed),
        Policy::Token | Policy::Prema => {
            let threshold = prema_threshold(queued.iter().map(|&i| &tasks[i]), cfg);
            let mut candidates: Vec<usize> = queued
                .iter()
                .copied()
                .filter(|&i| tasks[i].tokens >= threshold)
                .collect();
            if candidates.is_empty() {
                // Only reachable with token debiting enabled; the plain
                // threshold rule always admits the max-token task.
                candidates = queued.to_vec();
            }
            if policy == Policy::Token {
                earliest(&candidates)
            } else {
                shortest(&candidates, &|i| tasks[i].remaining_estimate())
            }
        }
    }
}

/// Dynamic preemption-mechanism selection between draining the current task
/// and checkpointing it, by comparing the relative slowdown each side would
/// absorb.
pub fn choose_mechanism(current: &TaskContext, candidate: &TaskContext) -> Mechanism {
    let current_remaining = current.time_estimated - current.time_executed;
    let candidate_remaining = candidate.time_estimated - candidate.time_executed;
    let degradation_current = candidate_remaining / current.time_estimated;
    let degradation_candidate = current_remaining / candidate.time_estimated;
    if degradation_current > degradation_candidate {
        Mechanism::Drain
    } else {
        Mechanism::Checkpoint
    }
}
