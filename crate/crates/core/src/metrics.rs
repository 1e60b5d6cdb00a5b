//! Multi-program metrics over simulation traces.
//!
//! Per task, normalized turnaround time is the multi-tasked completion time
//! (dispatch to finish) over the isolated completion time. ANTT averages it,
//! STP sums the reciprocals, and fairness is the minimum pairwise ratio of
//! priority-normalized progress.

use std::collections::BTreeMap;

use crate::task::Priority;
use crate::trace::SimTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskMetrics {
    pub task_id: String,
    pub c_single: f64,
    pub c_multi: f64,
    /// Slowdown versus isolation, `c_multi / c_single`.
    pub ntt: f64,
    /// Priority-normalized progress.
    pub pp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_task: Vec<TaskMetrics>,
    pub antt: f64,
    pub stp: f64,
    pub fairness: f64,
}

/// Compute ANTT, STP, and fairness from a trace plus per-task solo baselines
/// and priority weights.
pub fn compute_metrics(
    trace: &SimTrace,
    solo: &BTreeMap<String, f64>,
    priorities: &BTreeMap<String, f64>,
) -> Result<MetricsReport> {
    let n = trace.tasks.len();
    if n == 0 {
        return Err(Error::Simulation("empty trace".into()));
    }
    let weight_sum: f64 = trace
        .tasks
        .keys()
        .map(|id| priorities.get(id).copied().unwrap_or(0.0))
        .sum();
    let mut per_task = Vec::with_capacity(n);
    for (id, summary) in &trace.tasks {
        let &c_single = solo
            .get(id)
            .ok_or_else(|| Error::Simulation(format!("task {id}: missing solo time")))?;
        let &weight = priorities
            .get(id)
            .ok_or_else(|| Error::Simulation(format!("task {id}: missing priority weight")))?;
        if c_single.is_nan() || c_single <= 0.0 {
            return Err(Error::Simulation(format!(
                "task {id}: solo time must be positive"
            )));
        }
        let c_multi = summary.c_multi();
        let ntt = c_multi / c_single;
        if ntt < 1.0 - 1e-9 {
            return Err(Error::Simulation(format!(
                "task {id}: turnaround {c_multi} beats its isolated run {c_single}"
            )));
        }
        let pp = (c_single / c_multi) / (weight / weight_sum);
        per_task.push(TaskMetrics {
            task_id: id.clone(),
            c_single,
            c_multi,
            ntt,
            pp,
        });
    }
    let antt = per_task.iter().map(|t| t.ntt).sum::<f64>() / n as f64;
    let stp = per_task.iter().map(|t| 1.0 / t.ntt).sum::<f64>();
    // Minimum over ordered pairs of PP_i / PP_j.
    let pp_min = per_task.iter().map(|t| t.pp).fold(f64::INFINITY, f64::min);
    let pp_max = per_task.iter().map(|t| t.pp).fold(0.0f64, f64::max);
    let fairness = pp_min / pp_max;
    Ok(MetricsReport {
        per_task,
        antt,
        stp,
        fairness,
    })
}

/// Fraction of tasks whose completion exceeded `n * c_single`, per SLA
/// multiplier.
pub fn sla_violation_rate(
    trace: &SimTrace,
    solo: &BTreeMap<String, f64>,
    n_values: &[f64],
) -> Result<BTreeMap<String, f64>> {
    if n_values.is_empty() {
        return Err(Error::Simulation("no SLA multipliers given".into()));
    }
    let total = trace.tasks.len() as f64;
    let mut out = BTreeMap::new();
    for &n in n_values {
        if n.is_nan() || n <= 1.0 {
            return Err(Error::Simulation(format!(
                "SLA multiplier {n} must be > 1"
            )));
        }
        let mut violated = 0usize;
        for (id, summary) in &trace.tasks {
            let &c_single = solo
                .get(id)
                .ok_or_else(|| Error::Simulation(format!("task {id}: missing solo time")))?;
            if summary.c_multi() > n * c_single {
                violated += 1;
            }
        }
        out.insert(format_n(n), violated as f64 / total);
    }
    Ok(out)
}

pub fn format_n(n: f64) -> String {
    if n.fract() == 0.0 {
        format!("{}", n as u64)
    } else {
        format!("{n}")
    }
}

/// Nearest-rank percentile of completion times over tasks matching the
/// priority filter (`None` keeps every task).
pub fn tail_latency(
    trace: &SimTrace,
    percentile: f64,
    filter: Option<Priority>,
) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::Simulation(format!(
            "percentile {percentile} out of (0, 100)"
        )));
    }
    let mut latencies: Vec<f64> = trace
        .tasks
        .values()
        .filter(|t| filter.map(|p| t.priority == p.as_str()).unwrap_or(true))
        .map(|t| t.c_multi())
        .collect();
    if latencies.is_empty() {
        return Err(Error::Simulation(
            "no tasks match the tail-latency filter".into(),
        ));
    }
    latencies.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * latencies.len() as f64).ceil() as usize;
    Ok(latencies[rank.clamp(1, latencies.len()) - 1])
}
