//! Event-driven execution engine for the preemptible NPU.
//!
//! One simulation run owns all of its state and is strictly single threaded;
//! independent runs share nothing and may execute in parallel.
//!
//! Execution advances analytically in whole tiles: between scheduler wakes,
//! progress is computed in closed form from per-tile times rather than one
//! event per tile. Preemption only ever lands on a tile boundary — the
//! in-flight GEMM always completes first — so consumption is rounded up to
//! the boundary whenever a wake interrupts a segment. The scheduler wakes
//! when a task is dispatched, when the running task finishes, and when the
//! period time-quota expires.

use std::collections::BTreeMap;

use crate::model::{ModelLibrary, ModelSpec};
use crate::predict::{tile_counts, TileMode};
use crate::sched::{
    choose_mechanism, init_tokens, prema_threshold, refresh_tokens, select_candidate, Mechanism,
    MechanismMode, SchedulerConfig, WakeReason,
};
use crate::task::{LayerCursor, TaskContext, TaskState};
use crate::trace::{EventKind, SimTrace, TaskSummary};
use crate::workload::{estimated_time, TaskSpec, Workload};
use crate::{Error, NpuConfig, Result};

const EPS: f64 = 1e-6;

/// Tile composition of one executed layer. Inner (full-width) tiles come
/// first, then the edge-column tiles.
#[derive(Debug, Clone)]
pub struct LayerTiles {
    pub inner: u64,
    pub outer: u64,
    pub t_inner: f64,
    pub t_outer: f64,
}

impl LayerTiles {
    pub fn total_tiles(&self) -> u64 {
        self.inner + self.outer
    }

    pub fn total_cycles(&self) -> f64 {
        self.inner as f64 * self.t_inner + self.outer as f64 * self.t_outer
    }
}

/// Precomputed per-tile times over a task's effective layer sequence.
#[derive(Debug, Clone)]
pub struct TilePlan {
    pub layers: Vec<LayerTiles>,
    pub total_cycles: f64,
}

impl TilePlan {
    /// Build the plan for a model instance (batch already folded in) and, for
    /// recurrent models, the given actual unroll length.
    pub fn build(model: &ModelSpec, unroll: Option<u64>, cfg: &NpuConfig) -> Result<TilePlan> {
        let unroll = match (model.family.is_recurrent(), unroll) {
            (true, Some(u)) if u >= 1 => u,
            (true, _) => {
                return Err(Error::Model {
                    model: model.name.clone(),
                    msg: "recurrent model needs an unroll length".into(),
                })
            }
            (false, _) => 1,
        };
        let mut layers = Vec::new();
        let mut total = 0.0;
        for idx in model.effective_layer_indices(unroll) {
            let l = &model.layers[idx];
            let tb = tile_counts(l.m, l.k, l.n, cfg, TileMode::Generalized);
            let lt = LayerTiles {
                inner: tb.inner_count,
                outer: tb.outer_count,
                t_inner: tb.t_inner,
                t_outer: tb.t_outer,
            };
            total += lt.total_cycles();
            layers.push(lt);
        }
        Ok(TilePlan {
            layers,
            total_cycles: total,
        })
    }

    pub fn finished(&self, cursor: LayerCursor) -> bool {
        cursor.layer >= self.layers.len()
    }
}

/// Advance whole tiles from `cursor` until `budget` cycles are covered or the
/// network finishes. Consumption rounds up to the boundary of the tile in
/// flight when the budget lands inside one, so the returned cycles can exceed
/// the budget by less than one tile. A cursor that completes a layer moves to
/// the next layer's start, so layer boundaries read as zero tiles done.
pub fn advance_tiles(
    plan: &TilePlan,
    cursor: LayerCursor,
    budget: f64,
) -> (LayerCursor, f64, bool) {
    debug_assert!(budget > 0.0, "segment budget must be positive");
    let mut cur = cursor;
    let mut left = budget;
    let mut consumed = 0.0;
    loop {
        if cur.layer >= plan.layers.len() {
            return (cur, consumed, true);
        }
        let lt = &plan.layers[cur.layer];
        let total = lt.total_tiles();
        if cur.tiles_done >= total {
            cur.layer += 1;
            cur.tiles_done = 0;
            continue;
        }
        // The remaining tiles of the current uniform run.
        let (count, t) = if cur.tiles_done < lt.inner {
            (lt.inner - cur.tiles_done, lt.t_inner)
        } else {
            (total - cur.tiles_done, lt.t_outer)
        };
        let span = count as f64 * t;
        if left >= span - EPS {
            left -= span;
            consumed += span;
            cur.tiles_done += count;
            if left <= EPS {
                if cur.tiles_done >= total {
                    cur.layer += 1;
                    cur.tiles_done = 0;
                }
                return (cur, consumed, cur.layer >= plan.layers.len());
            }
        } else {
            let tiles = (((left / t) - 1e-9).ceil().max(1.0) as u64).min(count);
            consumed += tiles as f64 * t;
            cur.tiles_done += tiles;
            if cur.tiles_done >= total {
                cur.layer += 1;
                cur.tiles_done = 0;
            }
            return (cur, consumed, cur.layer >= plan.layers.len());
        }
    }
}

/// Mutating wrapper over [`advance_tiles`]: moves the task's cursor and
/// execution clock. Returns cycles consumed and whether the network finished.
pub fn execute_segment(task: &mut TaskContext, plan: &TilePlan, budget: f64) -> (f64, bool) {
    let (cursor, consumed, finished) = advance_tiles(plan, task.cursor, budget);
    task.cursor = cursor;
    task.time_executed += consumed;
    (consumed, finished)
}

/// Bytes of on-chip context a checkpoint must spill: the output activations
/// produced since the current layer started, one `sw x acc` output tile per
/// completed tile, capped at the activation SRAM size. Zero exactly on layer
/// boundaries, where outputs are assumed flushed.
pub fn checkpoint_size(task: &TaskContext, cfg: &NpuConfig) -> u64 {
    let bytes = task
        .cursor
        .tiles_done
        .saturating_mul(cfg.sw)
        .saturating_mul(cfg.acc)
        .saturating_mul(cfg.elem_bytes);
    bytes.min(cfg.ubuf_bytes)
}

fn dma_cycles(bytes: u64, cfg: &NpuConfig) -> f64 {
    cfg.mem_latency_cycles as f64 + (bytes as f64 / cfg.bw_bytes_per_cycle()).ceil()
}

/// Outcome of servicing a preemption request.
#[derive(Debug, Clone, PartialEq)]
pub struct PreemptionOutcome {
    pub mechanism: Mechanism,
    pub preemption_latency: f64,
    pub checkpoint_bytes: u64,
    pub resume_point: LayerCursor,
}

/// Apply a preemption mechanism to the running task.
///
/// Checkpoint spills the current layer's outputs and preserves the cursor;
/// kill costs nothing now but discards all progress, restarting the whole
/// network. Drain is a scheduler decision not to preempt and is rejected
/// here.
pub fn preempt(
    task: &mut TaskContext,
    mechanism: Mechanism,
    cfg: &NpuConfig,
) -> Result<PreemptionOutcome> {
    if !task.state.is_on_chip() {
        return Err(Error::Simulation(format!(
            "cannot preempt task {} in state {:?}",
            task.task_id, task.state
        )));
    }
    match mechanism {
        Mechanism::Checkpoint => {
            let bytes = checkpoint_size(task, cfg);
            task.checkpointed_bytes = bytes;
            task.state = TaskState::Preempted;
            Ok(PreemptionOutcome {
                mechanism,
                preemption_latency: dma_cycles(bytes, cfg),
                checkpoint_bytes: bytes,
                resume_point: task.cursor,
            })
        }
        Mechanism::Kill => {
            task.cursor = LayerCursor::default();
            task.time_executed = 0.0;
            task.checkpointed_bytes = 0;
            task.state = TaskState::Ready;
            Ok(PreemptionOutcome {
                mechanism,
                preemption_latency: 0.0,
                checkpoint_bytes: 0,
                resume_point: LayerCursor::default(),
            })
        }
        Mechanism::Drain => Err(Error::Simulation(
            "drain does not preempt; keep the task running".into(),
        )),
    }
}

/// Put a task on the NPU, paying the restore DMA if it was checkpointed.
/// Returns the restore latency (zero for fresh and killed tasks).
pub fn resume(task: &mut TaskContext, cfg: &NpuConfig) -> Result<f64> {
    match task.state {
        TaskState::Running | TaskState::Draining => Err(Error::Simulation(format!(
            "task {} is already running",
            task.task_id
        ))),
        TaskState::Finished => Err(Error::Simulation(format!(
            "task {} already finished",
            task.task_id
        ))),
        TaskState::Preempted => {
            let latency = dma_cycles(task.checkpointed_bytes, cfg);
            task.checkpointed_bytes = 0;
            task.state = TaskState::Running;
            Ok(latency)
        }
        TaskState::Ready => {
            task.state = TaskState::Running;
            Ok(0.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Full simulation
// ---------------------------------------------------------------------------

struct Run {
    tid: usize,
    quota_left: f64,
}

struct Sim<'a> {
    cfg: &'a NpuConfig,
    sched: &'a SchedulerConfig,
    ctxs: Vec<TaskContext>,
    plans: Vec<TilePlan>,
    admitted: Vec<bool>,
    actual_totals: Vec<f64>,
    /// (dispatch time, task index), sorted; `next_arrival` indexes into it.
    arrivals: Vec<(f64, usize)>,
    next_arrival: usize,
    running: Option<Run>,
    rr_cursor: usize,
    now: f64,
    /// Tasks were admitted during a DMA window; re-run the dispatch wake at
    /// the next tile boundary.
    recheck_dispatch: bool,
    /// Candidates vetoed by a drain verdict: they cannot be scheduled until
    /// the task that was running when the verdict was taken leaves the NPU.
    drained: std::collections::BTreeSet<usize>,
    trace: SimTrace,
    live_checkpoint_bytes: u64,
    capacity_warned: bool,
    horizon: f64,
}

impl<'a> Sim<'a> {
    fn admit_arrivals(&mut self) -> usize {
        let mut admitted = 0;
        while self.next_arrival < self.arrivals.len() {
            let (t, tid) = self.arrivals[self.next_arrival];
            if t > self.now {
                break;
            }
            self.next_arrival += 1;
            self.admitted[tid] = true;
            init_tokens(&mut self.ctxs[tid], self.sched);
            let id = self.ctxs[tid].task_id.clone();
            self.trace.push(t, &id, EventKind::Dispatch);
            admitted += 1;
        }
        admitted
    }

    fn queued(&self) -> Vec<usize> {
        (0..self.ctxs.len())
            .filter(|&i| self.admitted[i] && self.ctxs[i].state != TaskState::Finished)
            .collect()
    }

    /// Tasks eligible for selection: the queue minus standing drain verdicts.
    /// The running task is never drained, so this is non-empty whenever the
    /// queue is.
    fn selectable(&self) -> Vec<usize> {
        self.queued()
            .into_iter()
            .filter(|i| !self.drained.contains(i))
            .collect()
    }

    fn select(&self, reason: WakeReason) -> usize {
        select_candidate(
            &self.ctxs,
            &self.selectable(),
            self.sched.policy,
            reason,
            self.running.as_ref().map(|r| r.tid),
            self.rr_cursor,
            &self.actual_totals,
            self.sched,
        )
    }

    fn refresh(&mut self) {
        let now = self.now;
        let admitted = &self.admitted;
        refresh_tokens(
            self.ctxs
                .iter_mut()
                .enumerate()
                .filter(|(i, c)| admitted[*i] && c.state != TaskState::Finished)
                .map(|(_, c)| c),
            now,
            self.sched,
        );
    }

    fn start_or_resume(&mut self, tid: usize) -> Result<()> {
        let was_preempted = self.ctxs[tid].state == TaskState::Preempted;
        let restored_bytes = self.ctxs[tid].checkpointed_bytes;
        let latency = resume(&mut self.ctxs[tid], self.cfg)?;
        let id = self.ctxs[tid].task_id.clone();
        if was_preempted {
            self.live_checkpoint_bytes = self.live_checkpoint_bytes.saturating_sub(restored_bytes);
            self.trace.push(self.now, &id, EventKind::Resume { latency });
            self.now += latency;
            self.trace.dma_cycles += latency;
        } else {
            self.trace.push(self.now, &id, EventKind::Start);
        }
        if self.sched.debit_tokens_on_schedule && self.sched.policy.uses_tokens() {
            let queued = self.queued();
            let threshold =
                prema_threshold(queued.iter().map(|&i| &self.ctxs[i]), self.sched);
            let t = &mut self.ctxs[tid];
            t.tokens = (t.tokens - threshold).max(0.0);
        }
        self.rr_cursor = self.ctxs[tid].dispatch_index;
        self.drained.clear();
        self.running = Some(Run {
            tid,
            quota_left: self.sched.period_cycles,
        });
        if self.admit_arrivals() > 0 {
            self.recheck_dispatch = true;
        }
        Ok(())
    }

    /// Record a drain verdict: `cand` cannot be scheduled while the current
    /// task holds the NPU. The current task keeps running.
    fn defer_candidate(&mut self, cur: usize, cand: usize) {
        if self.drained.insert(cand) {
            self.ctxs[cur].state = TaskState::Draining;
            let cur_id = self.ctxs[cur].task_id.clone();
            let cand_id = self.ctxs[cand].task_id.clone();
            let remaining = self.actual_totals[cur] - self.ctxs[cur].time_executed;
            self.trace.push(
                self.now,
                &cand_id,
                EventKind::DrainWait {
                    current: cur_id,
                    current_remaining: remaining,
                },
            );
        }
    }

    /// Switch the NPU from the running task to `cand` using the given
    /// mechanism (checkpoint or kill; drain never reaches here).
    fn switch_to(&mut self, cand: usize, mechanism: Mechanism) -> Result<()> {
        let cur = self.running.as_ref().expect("switch with a task running").tid;
        debug_assert_ne!(cur, cand);
        match mechanism {
            Mechanism::Drain => Err(Error::Simulation("drain is not a switch".into())),
            Mechanism::Kill => {
                let wasted = self.ctxs[cur].time_executed;
                let outcome = preempt(&mut self.ctxs[cur], Mechanism::Kill, self.cfg)?;
                let id = self.ctxs[cur].task_id.clone();
                let summary = self.trace.tasks.get_mut(&id).expect("summary exists");
                summary.wasted_cycles += wasted;
                summary.preemptions += 1;
                summary.kills += 1;
                self.trace.push(
                    self.now,
                    &id,
                    EventKind::Preempt {
                        mechanism: Mechanism::Kill,
                        latency: outcome.preemption_latency,
                        bytes: 0,
                    },
                );
                self.start_or_resume(cand)
            }
            Mechanism::Checkpoint => {
                let outcome = preempt(&mut self.ctxs[cur], Mechanism::Checkpoint, self.cfg)?;
                let id = self.ctxs[cur].task_id.clone();
                let summary = self.trace.tasks.get_mut(&id).expect("summary exists");
                summary.preemptions += 1;
                summary.max_checkpoint_bytes =
                    summary.max_checkpoint_bytes.max(outcome.checkpoint_bytes);
                self.trace.push(
                    self.now,
                    &id,
                    EventKind::Preempt {
                        mechanism: Mechanism::Checkpoint,
                        latency: outcome.preemption_latency,
                        bytes: outcome.checkpoint_bytes,
                    },
                );
                self.live_checkpoint_bytes += outcome.checkpoint_bytes;
                if self.live_checkpoint_bytes > self.cfg.npu_memory_bytes && !self.capacity_warned
                {
                    self.capacity_warned = true;
                    self.trace.warnings.push(format!(
                        "checkpointed state ({} bytes) exceeds npu_memory_bytes ({}); \
                         migration to host memory is not modeled",
                        self.live_checkpoint_bytes, self.cfg.npu_memory_bytes
                    ));
                }
                self.now += outcome.preemption_latency;
                self.trace.dma_cycles += outcome.preemption_latency;
                if self.admit_arrivals() > 0 {
                    self.recheck_dispatch = true;
                }
                self.start_or_resume(cand)
            }
        }
    }

    fn finish_task(&mut self, tid: usize) {
        self.drained.clear();
        self.ctxs[tid].state = TaskState::Finished;
        let id = self.ctxs[tid].task_id.clone();
        self.trace.push(self.now, &id, EventKind::Finish);
        let summary = self.trace.tasks.get_mut(&id).expect("summary exists");
        summary.finish_time = self.now;
        summary.executed_cycles = self.ctxs[tid].time_executed;
        self.running = None;
    }

    /// Handle a wake while a task runs: refresh tokens if the quota is spent,
    /// select, and preempt or extend the quota accordingly.
    fn wake_running(&mut self, tid: usize) -> Result<()> {
        let quota_spent = self
            .running
            .as_ref()
            .map(|r| r.quota_left <= EPS)
            .unwrap_or(false);
        let reason = if quota_spent {
            WakeReason::QuantumExpiry
        } else {
            WakeReason::Dispatch
        };
        if reason == WakeReason::QuantumExpiry {
            self.refresh();
        }
        loop {
            let cand = self.select(reason);
            if cand == tid {
                if reason == WakeReason::QuantumExpiry {
                    if let Some(r) = self.running.as_mut() {
                        r.quota_left = self.sched.period_cycles;
                    }
                }
                return Ok(());
            }
            let mechanism = match self.sched.mechanism_mode {
                MechanismMode::StaticCheckpoint => Mechanism::Checkpoint,
                MechanismMode::StaticKill => Mechanism::Kill,
                MechanismMode::Dynamic => choose_mechanism(&self.ctxs[tid], &self.ctxs[cand]),
            };
            if mechanism == Mechanism::Drain {
                // The verdict vetoes this candidate only; the policy may
                // still surface a different task that wins a checkpoint.
                self.defer_candidate(tid, cand);
                continue;
            }
            return self.switch_to(cand, mechanism);
        }
    }

    fn run(mut self) -> Result<SimTrace> {
        loop {
            self.admit_arrivals();
            let Some(run) = self.running.as_ref() else {
                self.recheck_dispatch = false;
                if self.queued().is_empty() {
                    if self.next_arrival < self.arrivals.len() {
                        self.now = self.arrivals[self.next_arrival].0;
                        continue;
                    }
                    break;
                }
                let cand = self.select(WakeReason::Free);
                self.start_or_resume(cand)?;
                continue;
            };
            if self.now > self.horizon {
                return Err(Error::Simulation(format!(
                    "no forward progress: simulated time exceeded the horizon at {:.0} cycles \
                     (policy={}, mechanism={})",
                    self.now,
                    self.sched.policy.as_str(),
                    self.sched.mechanism_mode.as_str()
                )));
            }
            let tid = run.tid;
            let quota_left = run.quota_left;
            let interruptible = self.sched.policy.preempts_on_dispatch();

            // A dispatch landed inside a DMA window: let the in-flight tile
            // complete, then hold the dispatch wake.
            if self.recheck_dispatch {
                self.recheck_dispatch = false;
                if interruptible {
                    let (consumed, finished) =
                        execute_segment(&mut self.ctxs[tid], &self.plans[tid], EPS);
                    self.now += consumed;
                    if let Some(r) = self.running.as_mut() {
                        r.quota_left -= consumed;
                    }
                    self.admit_arrivals();
                    if finished {
                        self.finish_task(tid);
                    } else {
                        self.wake_running(tid)?;
                    }
                    continue;
                }
            }

            let (_, seg_consumed, seg_finishes) =
                advance_tiles(&self.plans[tid], self.ctxs[tid].cursor, quota_left);
            let next_arrival = (self.next_arrival < self.arrivals.len())
                .then(|| self.arrivals[self.next_arrival].0);

            if interruptible {
                if let Some(t_arr) = next_arrival {
                    if t_arr < self.now + seg_consumed - EPS {
                        // Wake on dispatch: run up to the tile boundary at or
                        // after the arrival, then reconsider. Rounding up to
                        // the boundary can complete the network outright when
                        // the arrival lands inside the last tile.
                        let need = (t_arr - self.now).max(EPS);
                        let (consumed, finished) =
                            execute_segment(&mut self.ctxs[tid], &self.plans[tid], need);
                        self.now += consumed;
                        if let Some(r) = self.running.as_mut() {
                            r.quota_left -= consumed;
                        }
                        self.admit_arrivals();
                        if finished {
                            self.finish_task(tid);
                        } else {
                            self.wake_running(tid)?;
                        }
                        continue;
                    }
                }
            }

            // Run the whole segment: finish or quota expiry.
            let (consumed, finished) =
                execute_segment(&mut self.ctxs[tid], &self.plans[tid], quota_left);
            debug_assert!((consumed - seg_consumed).abs() < 1e-3);
            debug_assert_eq!(finished, seg_finishes);
            self.now += consumed;
            if let Some(r) = self.running.as_mut() {
                r.quota_left -= consumed;
            }
            if finished {
                self.finish_task(tid);
                continue;
            }
            self.admit_arrivals();
            self.wake_running(tid)?;
        }

        self.trace.makespan = self.now;
        self.trace
            .validate()
            .map_err(|e| Error::Simulation(format!("trace invariant violated: {e}")))?;
        Ok(self.trace)
    }
}

/// Run one full simulation of `workload` under the given scheduler
/// configuration. Fully deterministic: identical inputs produce identical
/// traces. `solo` optionally supplies per-task isolated times for the
/// summary table (they do not affect scheduling; the oracle policy uses
/// ground-truth totals derived from the tile plans).
pub fn run_simulation(
    workload: &Workload,
    library: &ModelLibrary,
    cfg: &NpuConfig,
    sched: &SchedulerConfig,
    solo: Option<&BTreeMap<String, f64>>,
) -> Result<SimTrace> {
    workload.validate(library)?;
    crate::config::validate_config(cfg.clone())?;

    // Sort arrivals by time, stable in file order.
    let mut order: Vec<usize> = (0..workload.tasks.len()).collect();
    order.sort_by(|&a, &b| {
        workload.tasks[a]
            .dispatch_cycles
            .cmp(&workload.tasks[b].dispatch_cycles)
            .then(a.cmp(&b))
    });

    let mut ctxs = Vec::with_capacity(order.len());
    let mut plans = Vec::with_capacity(order.len());
    let mut arrivals = Vec::with_capacity(order.len());
    let mut trace = SimTrace {
        freq_hz: cfg.freq_hz,
        ..SimTrace::default()
    };
    let mut sum_actual = 0.0;
    let mut warned_models = std::collections::BTreeSet::new();

    for (dispatch_index, &spec_idx) in order.iter().enumerate() {
        let spec: &TaskSpec = &workload.tasks[spec_idx];
        let model = library.model(&spec.model)?;
        if warned_models.insert(spec.model.clone()) {
            trace.warnings.extend(model.capacity_warnings(cfg));
        }
        let instance = model.with_batch(spec.batch)?;
        let plan = TilePlan::build(&instance, spec.actual_unroll, cfg)?;
        let estimated = estimated_time(spec, library, cfg)?;
        if estimated.is_nan() || estimated <= 0.0 {
            return Err(Error::Workload(format!(
                "task {}: estimated time must be positive",
                spec.id
            )));
        }
        let dispatch = spec.dispatch_cycles as f64;
        trace.tasks.insert(
            spec.id.clone(),
            TaskSummary {
                model: spec.model.clone(),
                batch: spec.batch,
                priority: spec.priority.as_str(),
                dispatch_time: dispatch,
                solo_cycles: solo.and_then(|m| m.get(&spec.id).copied()).unwrap_or(0.0),
                ..TaskSummary::default()
            },
        );
        sum_actual += plan.total_cycles;
        arrivals.push((dispatch, dispatch_index));
        ctxs.push(TaskContext::new(
            spec.id.clone(),
            spec.priority,
            estimated,
            dispatch,
            dispatch_index,
        ));
        plans.push(plan);
    }

    let actual_totals: Vec<f64> = plans.iter().map(|p| p.total_cycles).collect();
    let n = ctxs.len();
    let horizon = workload.window_cycles as f64 + sum_actual * 50.0 + 1e8;
    let sim = Sim {
        cfg,
        sched,
        ctxs,
        plans,
        admitted: vec![false; n],
        actual_totals,
        arrivals,
        next_arrival: 0,
        running: None,
        rr_cursor: usize::MAX, // first RR pick wraps to the earliest task
        now: 0.0,
        recheck_dispatch: false,
        drained: std::collections::BTreeSet::new(),
        trace,
        live_checkpoint_bytes: 0,
        capacity_warned: false,
        horizon,
    };
    sim.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LayerSpec, ModelFamily};
    use crate::sched::Policy;
    use crate::task::Priority;

    fn cfg() -> NpuConfig {
        NpuConfig::default()
    }

    /// A plan with one layer of `tiles` full tiles at 512 cycles each.
    fn uniform_plan(tiles: u64) -> TilePlan {
        TilePlan {
            layers: vec![LayerTiles {
                inner: tiles,
                outer: 0,
                t_inner: 512.0,
                t_outer: 0.0,
            }],
            total_cycles: tiles as f64 * 512.0,
        }
    }

    fn task_at(cursor: LayerCursor) -> TaskContext {
        let mut t = TaskContext::new("t".into(), Priority::Low, 1e6, 0.0, 0);
        t.cursor = cursor;
        t.state = TaskState::Running;
        t
    }

    #[test]
    fn segment_rounds_up_to_tile_boundary() {
        let plan = uniform_plan(10);
        let mut t = task_at(LayerCursor::default());
        let (consumed, finished) = execute_segment(&mut t, &plan, 2000.0);
        assert_eq!(t.cursor.tiles_done, 4);
        assert_eq!(consumed, 2048.0);
        assert!(!finished);
    }

    #[test]
    fn segment_finishes_with_exact_remainder() {
        let plan = uniform_plan(10);
        let mut t = task_at(LayerCursor {
            layer: 0,
            tiles_done: 6,
        });
        let (consumed, finished) = execute_segment(&mut t, &plan, 1e9);
        assert_eq!(consumed, 4.0 * 512.0);
        assert!(finished);
        assert!(plan.finished(t.cursor));
    }

    #[test]
    fn tiny_budget_still_completes_one_tile() {
        let plan = uniform_plan(10);
        let mut t = task_at(LayerCursor::default());
        let (consumed, finished) = execute_segment(&mut t, &plan, 1.0);
        assert_eq!(t.cursor.tiles_done, 1);
        assert_eq!(consumed, 512.0);
        assert!(!finished);
    }

    #[test]
    fn exact_budget_stops_on_run_boundary_without_extra_tile() {
        // Layer with 2 inner tiles then 2 outer tiles; budget exactly covers
        // the inner run.
        let plan = TilePlan {
            layers: vec![LayerTiles {
                inner: 2,
                outer: 2,
                t_inner: 512.0,
                t_outer: 386.0,
            }],
            total_cycles: 2.0 * 512.0 + 2.0 * 386.0,
        };
        let (cur, consumed, finished) = advance_tiles(&plan, LayerCursor::default(), 1024.0);
        assert_eq!(cur.tiles_done, 2);
        assert_eq!(consumed, 1024.0);
        assert!(!finished);
    }

    #[test]
    fn checkpoint_counts_output_tiles() {
        let mut t = task_at(LayerCursor {
            layer: 0,
            tiles_done: 4,
        });
        assert_eq!(checkpoint_size(&t, &cfg()), 4 * 128 * 128 * 2);
        t.cursor.tiles_done = 0;
        assert_eq!(checkpoint_size(&t, &cfg()), 0);
        t.cursor.tiles_done = 10_000; // would exceed the SRAM
        assert_eq!(checkpoint_size(&t, &cfg()), 8 * 1024 * 1024);
    }

    #[test]
    fn checkpoint_latency_of_full_buffer() {
        let mut t = task_at(LayerCursor {
            layer: 0,
            tiles_done: 10_000,
        });
        let out = preempt(&mut t, Mechanism::Checkpoint, &cfg()).unwrap();
        assert_eq!(out.checkpoint_bytes, 8 * 1024 * 1024);
        assert_eq!(out.preemption_latency, 16_503.0);
        // 23.6 us at 700 MHz
        assert!((cfg().cycles_to_us(out.preemption_latency) - 23.575).abs() < 0.01);
    }

    #[test]
    fn kill_is_free_and_discards_progress() {
        let mut t = task_at(LayerCursor {
            layer: 3,
            tiles_done: 7,
        });
        t.time_executed = 12345.0;
        let out = preempt(&mut t, Mechanism::Kill, &cfg()).unwrap();
        assert_eq!(out.preemption_latency, 0.0);
        assert_eq!(t.cursor, LayerCursor::default());
        assert_eq!(t.time_executed, 0.0);
        assert_eq!(t.state, TaskState::Ready);
        assert_eq!(resume(&mut t, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn boundary_checkpoint_costs_only_the_trap() {
        let mut t = task_at(LayerCursor {
            layer: 2,
            tiles_done: 0,
        });
        let out = preempt(&mut t, Mechanism::Checkpoint, &cfg()).unwrap();
        assert_eq!(out.checkpoint_bytes, 0);
        assert_eq!(out.preemption_latency, 100.0);
    }

    #[test]
    fn restore_is_symmetric_and_preserves_cursor() {
        let cursor = LayerCursor {
            layer: 1,
            tiles_done: 4,
        };
        let mut t = task_at(cursor);
        let out = preempt(&mut t, Mechanism::Checkpoint, &cfg()).unwrap();
        assert_eq!(out.checkpoint_bytes, 131_072);
        let restore = resume(&mut t, &cfg()).unwrap();
        assert_eq!(restore, 100.0 + 257.0);
        assert_eq!(t.cursor, cursor);
        assert_eq!(t.state, TaskState::Running);
        assert_eq!(t.checkpointed_bytes, 0);
    }

    #[test]
    fn preempting_non_running_task_rejected() {
        let mut t = TaskContext::new("t".into(), Priority::Low, 1e6, 0.0, 0);
        assert!(preempt(&mut t, Mechanism::Checkpoint, &cfg()).is_err());
        t.state = TaskState::Running;
        assert!(resume(&mut t, &cfg()).is_err());
        assert!(preempt(&mut t, Mechanism::Drain, &cfg()).is_err());
    }

    // -- full-run tests on a synthetic library ------------------------------

    fn tiny_library() -> ModelLibrary {
        let mut lib = ModelLibrary::new();
        // 1024 tiles of 512 cycles, ~0.75 ms at 700 MHz.
        lib.add_model(ModelSpec {
            name: "long".into(),
            family: ModelFamily::Cnn,
            layers: vec![LayerSpec::gemm(512, 512, 128 * 64)],
            recurrent_range: None,
            profile: None,
        })
        .unwrap();
        // 64 tiles.
        lib.add_model(ModelSpec {
            name: "short".into(),
            family: ModelFamily::Cnn,
            layers: vec![LayerSpec::gemm(128, 128, 128 * 64)],
            recurrent_range: None,
            profile: None,
        })
        .unwrap();
        lib
    }

    fn spec(id: &str, model: &str, priority: Priority, dispatch: u64) -> TaskSpec {
        TaskSpec {
            id: id.into(),
            model: model.into(),
            batch: 1,
            priority,
            dispatch_cycles: dispatch,
            input_seq_len: None,
            actual_unroll: None,
            predicted_unroll: None,
        }
    }

    fn sched(policy: Policy, mechanism: MechanismMode) -> SchedulerConfig {
        SchedulerConfig {
            policy,
            mechanism_mode: mechanism,
            ..SchedulerConfig::default()
        }
    }

    #[test]
    fn single_task_runs_uninterrupted() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 0,
            tasks: vec![spec("a", "short", Priority::Low, 0)],
        };
        for policy in Policy::ALL {
            let trace =
                run_simulation(&w, &lib, &cfg(), &sched(policy, MechanismMode::Dynamic), None)
                    .unwrap();
            let c = trace.completion_time("a").unwrap();
            assert_eq!(c, 64.0 * 512.0, "{policy:?}");
            assert_eq!(trace.tasks["a"].preemptions, 0);
        }
    }

    #[test]
    fn fcfs_serializes_identical_tasks() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 0,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "long", Priority::Low, 0),
            ],
        };
        let trace = run_simulation(
            &w,
            &lib,
            &cfg(),
            &sched(Policy::Fcfs, MechanismMode::StaticCheckpoint),
            None,
        )
        .unwrap();
        let solo = 1024.0 * 512.0;
        assert_eq!(trace.completion_time("a").unwrap(), solo);
        assert_eq!(trace.completion_time("b").unwrap(), 2.0 * solo);
        assert!(trace.events.iter().all(|e| e.kind.name() != "preempt"));
    }

    #[test]
    fn preemptive_hpf_lets_high_priority_jump_the_long_task() {
        let lib = tiny_library();
        // Long low-priority task first; short medium and short high arrive
        // while it runs.
        let w = Workload {
            seed: 0,
            window_cycles: 200_000,
            tasks: vec![
                spec("i1", "long", Priority::Low, 0),
                spec("i2", "short", Priority::Medium, 50_000),
                spec("i3", "short", Priority::High, 100_000),
            ],
        };
        let trace = run_simulation(
            &w,
            &lib,
            &cfg(),
            &sched(Policy::Hpf, MechanismMode::StaticCheckpoint),
            None,
        )
        .unwrap();
        let f1 = trace.tasks["i1"].finish_time;
        let f2 = trace.tasks["i2"].finish_time;
        let f3 = trace.tasks["i3"].finish_time;
        assert!(f3 < f1, "high priority must finish before the long task");
        assert!(f2 < f1);
        assert!(trace.tasks["i1"].preemptions >= 1);
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 400_000,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "short", Priority::High, 123_456),
                spec("c", "short", Priority::Medium, 300_001),
            ],
        };
        let s = sched(Policy::Prema, MechanismMode::Dynamic);
        let t1 = run_simulation(&w, &lib, &cfg(), &s, None).unwrap();
        let t2 = run_simulation(&w, &lib, &cfg(), &s, None).unwrap();
        assert_eq!(t1.event_log(), t2.event_log());
        assert_eq!(t1.summary_table(), t2.summary_table());
    }

    #[test]
    fn work_is_conserved_outside_dma_windows() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 500_000,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "short", Priority::High, 100_000),
                spec("c", "short", Priority::High, 200_000),
            ],
        };
        let s = sched(Policy::Sejf, MechanismMode::StaticCheckpoint);
        let trace = run_simulation(&w, &lib, &cfg(), &s, None).unwrap();
        let executed: f64 = trace.tasks.values().map(|t| t.executed_cycles).sum();
        let wasted: f64 = trace.tasks.values().map(|t| t.wasted_cycles).sum();
        // Arrivals at t=0 keep the NPU saturated, so busy time plus DMA
        // windows must account for the whole makespan.
        assert!(
            (executed + wasted + trace.dma_cycles - trace.makespan).abs() < 1e-3,
            "executed {executed} + dma {} != makespan {}",
            trace.dma_cycles,
            trace.makespan
        );
        // Executed cycles equal the solo total of each task.
        for name in ["a", "b", "c"] {
            let tiles = if name == "a" { 1024.0 } else { 64.0 };
            assert!((trace.tasks[name].executed_cycles - tiles * 512.0).abs() < 1e-6);
        }
    }

    #[test]
    fn static_kill_wastes_observable_work() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 500_000,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "short", Priority::High, 200_000),
            ],
        };
        let s = sched(Policy::Hpf, MechanismMode::StaticKill);
        let trace = run_simulation(&w, &lib, &cfg(), &s, None).unwrap();
        assert!(trace.tasks["a"].kills >= 1);
        // Wasted work is at least the progress made before the first kill.
        assert!(trace.tasks["a"].wasted_cycles >= 199_999.0);
    }

    #[test]
    fn rr_with_kill_reports_livelock_instead_of_hanging() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 0,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "long", Priority::Low, 0),
            ],
        };
        let s = sched(Policy::Rr, MechanismMode::StaticKill);
        let err = run_simulation(&w, &lib, &cfg(), &s, None).unwrap_err();
        assert!(err.to_string().contains("no forward progress"), "{err}");
    }

    #[test]
    fn token_debit_flag_still_completes_and_reduces_tokens() {
        let lib = tiny_library();
        let w = Workload {
            seed: 0,
            window_cycles: 400_000,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "short", Priority::High, 100_000),
                spec("c", "short", Priority::Medium, 200_000),
            ],
        };
        let s = SchedulerConfig {
            policy: Policy::Prema,
            mechanism_mode: MechanismMode::Dynamic,
            debit_tokens_on_schedule: true,
            ..SchedulerConfig::default()
        };
        let trace = run_simulation(&w, &lib, &cfg(), &s, None).unwrap();
        assert_eq!(trace.tasks.len(), 3);
        assert!(trace.tasks.values().all(|t| t.finish_time > 0.0));
    }

    #[test]
    fn drain_defers_the_candidate_until_completion() {
        let lib = tiny_library();
        // Current task nearly done when the candidate arrives: the dynamic
        // mechanism drains. "long" is 1024 tiles; dispatch the candidate when
        // ~960 tiles are done.
        let w = Workload {
            seed: 0,
            window_cycles: 500_000,
            tasks: vec![
                spec("a", "long", Priority::Low, 0),
                spec("b", "long", Priority::High, 491_520),
            ],
        };
        let s = sched(Policy::Hpf, MechanismMode::Dynamic);
        let trace = run_simulation(&w, &lib, &cfg(), &s, None).unwrap();
        let drain_ev = trace
            .events
            .iter()
            .find(|e| e.kind.name() == "drain_wait")
            .expect("drain decision recorded");
        let EventKind::DrainWait {
            current_remaining, ..
        } = &drain_ev.kind
        else {
            unreachable!()
        };
        let finish_a = trace.tasks["a"].finish_time;
        // The candidate waits exactly the current task's remaining time.
        assert!((finish_a - drain_ev.time - current_remaining).abs() < 1e-6);
        let start_b = trace
            .events
            .iter()
            .find(|e| e.task_id == "b" && e.kind.name() == "start")
            .unwrap()
            .time;
        assert!((start_b - finish_a).abs() < 1e-6);
        assert_eq!(trace.tasks["a"].preemptions, 0);
    }
}
