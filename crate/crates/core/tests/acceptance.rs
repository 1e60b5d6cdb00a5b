//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The policy-comparison criteria share one 25-seed, 8-task sweep over the
//! full policy x mechanism grid, computed once.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use npusim::lut::{build_lut, SeqLenProfile};
use npusim::metrics::compute_metrics;
use npusim::model::{LayerSpec, ModelFamily, ModelLibrary, ModelSpec};
use npusim::oracle::oracle_layer_time;
use npusim::predict::{predict_layer_time, TileMode};
use npusim::sched::{
    choose_mechanism, prema_threshold, Mechanism, MechanismMode, Policy, SchedulerConfig,
};
use npusim::task::{Priority, TaskContext};
use npusim::workload::{generate, SoloCache, TaskSpec, Workload};
use npusim::{engine, run_simulation, NpuConfig};

fn pass(n: u32, what: &str) {
    println!("[PASS] criterion {n}: {what}");
}

// ---------------------------------------------------------------------------
// Shared sweep
// ---------------------------------------------------------------------------

const SEEDS: u64 = 25;
const TASKS_PER_WORKLOAD: usize = 8;
const WINDOW_CYCLES: u64 = 7_000_000; // 10 ms at 700 MHz

#[derive(Debug, Clone)]
struct Cell {
    antt: f64,
    stp: f64,
    fairness: f64,
    /// (priority, c_single, c_multi) per task.
    tasks: Vec<(&'static str, f64, f64)>,
}

type Grid = BTreeMap<(&'static str, &'static str, u64), Option<Cell>>;

fn sweep() -> &'static Grid {
    static SWEEP: OnceLock<Grid> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let lib = ModelLibrary::builtin();
        let cfg = NpuConfig::default();
        let mut cache = SoloCache::new();
        let mut grid = Grid::new();
        for seed in 0..SEEDS {
            let workload = generate(seed, TASKS_PER_WORKLOAD, WINDOW_CYCLES, &lib).unwrap();
            let base = SchedulerConfig::default();
            let solo = cache.solo_map(&workload, &lib, &cfg, &base).unwrap();
            let weights: BTreeMap<String, f64> = workload
                .tasks
                .iter()
                .map(|t| (t.id.clone(), base.priority_tokens(t.priority)))
                .collect();
            for policy in Policy::ALL {
                for mech in MechanismMode::ALL {
                    let sched = SchedulerConfig {
                        policy,
                        mechanism_mode: mech,
                        ..SchedulerConfig::default()
                    };
                    let cell = match run_simulation(&workload, &lib, &cfg, &sched, Some(&solo)) {
                        Ok(trace) => {
                            let report = compute_metrics(&trace, &solo, &weights).unwrap();
                            let tasks = trace
                                .tasks
                                .iter()
                                .map(|(id, s)| (s.priority, solo[id], s.c_multi()))
                                .collect();
                            Some(Cell {
                                antt: report.antt,
                                stp: report.stp,
                                fairness: report.fairness,
                                tasks,
                            })
                        }
                        Err(_) => None, // rr x kill livelocks by construction
                    };
                    grid.insert((policy.as_str(), mech.as_str(), seed), cell);
                }
            }
        }
        grid
    })
}

fn mean_antt(grid: &Grid, policy: &str, mech: &str) -> f64 {
    let cells: Vec<&Cell> = grid
        .iter()
        .filter(|((p, m, _), c)| *p == policy && *m == mech && c.is_some())
        .map(|(_, c)| c.as_ref().unwrap())
        .collect();
    assert!(!cells.is_empty(), "{policy}/{mech} produced no cells");
    cells.iter().map(|c| c.antt).sum::<f64>() / cells.len() as f64
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_predictor_hand_examples_exact() {
    let cfg = NpuConfig::default();
    let a = predict_layer_time(128, 128, 128, &cfg, TileMode::PaperVerbatim);
    assert_eq!(a, 512.0, "single full tile");
    let b = predict_layer_time(128, 128, 130, &cfg, TileMode::PaperVerbatim);
    assert_eq!(b, 898.0, "full tile plus 2-column edge tile");
    // Generalized mode agrees on these shapes.
    assert_eq!(
        predict_layer_time(128, 128, 130, &cfg, TileMode::Generalized),
        898.0
    );
    pass(1, "predict(128,128,128) = 512 and predict(128,128,130) = 898 cycles, exact");
}

#[test]
fn criterion_02_predictor_vs_oracle_1000_shapes() {
    let cfg = NpuConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = cfg.sw * rng.random_range(1..=8);
        let k = cfg.sh * rng.random_range(1..=8);
        let n = rng.random_range(8192..=65_536);
        let closed = predict_layer_time(m, k, n, &cfg, TileMode::Generalized);
        let oracle = oracle_layer_time(m, k, n, &cfg);
        let rel = (oracle - closed).abs() / oracle;
        let bound = if n >= 64 * cfg.acc { 0.01 } else { 0.05 };
        assert!(rel < bound, "({m},{k},{n}): rel {rel} >= {bound}");
        worst = worst.max(rel);
    }
    pass(2, &format!("1000 random shapes, worst |closed-oracle|/oracle = {worst:.5} < 0.01"));
}

#[test]
fn criterion_03_preemption_latency_model() {
    let cfg = NpuConfig::default();
    // Full 8 MiB checkpoint at 358 GB/s and 700 MHz.
    let mut t = TaskContext::new("t".into(), Priority::Low, 1e6, 0.0, 0);
    t.state = npusim::task::TaskState::Running;
    t.cursor.tiles_done = u64::MAX / (cfg.sw * cfg.acc * cfg.elem_bytes); // saturate the cap
    let out = engine::preempt(&mut t, Mechanism::Checkpoint, &cfg).unwrap();
    assert_eq!(out.checkpoint_bytes, 8 * 1024 * 1024);
    assert_eq!(out.preemption_latency, 16_503.0);
    let us = cfg.cycles_to_us(out.preemption_latency);
    assert!((us - 23.575).abs() < 0.05);
    // The reported 12 us average / 59 us worst case embed trap overheads this
    // model does not include; they are documented, not asserted.

    // Kill latency is zero from any cursor.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mut t = TaskContext::new("k".into(), Priority::Low, 1e6, 0.0, 0);
        t.state = npusim::task::TaskState::Running;
        t.cursor.layer = rng.random_range(0..64);
        t.cursor.tiles_done = rng.random_range(0..100_000);
        let out = engine::preempt(&mut t, Mechanism::Kill, &cfg).unwrap();
        assert_eq!(out.preemption_latency, 0.0);
        assert_eq!(out.checkpoint_bytes, 0);
    }

    // Drain: zero preemption latency, wait equals the current task's
    // remaining network time. Two-task scenario where the dynamic selector
    // drains (current nearly done, candidate long).
    let mut lib = ModelLibrary::new();
    lib.add_model(ModelSpec {
        name: "m".into(),
        family: ModelFamily::Cnn,
        layers: vec![LayerSpec::gemm(512, 512, 128 * 64)],
        recurrent_range: None,
        profile: None,
    })
    .unwrap();
    let mk = |id: &str, priority: Priority, dispatch: u64| TaskSpec {
        id: id.into(),
        model: "m".into(),
        batch: 1,
        priority,
        dispatch_cycles: dispatch,
        input_seq_len: None,
        actual_unroll: None,
        predicted_unroll: None,
    };
    let w = Workload {
        seed: 0,
        window_cycles: 500_000,
        tasks: vec![
            mk("cur", Priority::Low, 0),
            mk("cand", Priority::High, 491_520),
        ],
    };
    let sched = SchedulerConfig {
        policy: Policy::Hpf,
        mechanism_mode: MechanismMode::Dynamic,
        ..SchedulerConfig::default()
    };
    let trace = run_simulation(&w, &lib, &NpuConfig::default(), &sched, None).unwrap();
    let drain = trace
        .events
        .iter()
        .find(|e| e.kind.name() == "drain_wait")
        .expect("drain verdict");
    let npusim::trace::EventKind::DrainWait {
        current_remaining, ..
    } = &drain.kind
    else {
        unreachable!()
    };
    let finish_cur = trace.tasks["cur"].finish_time;
    let start_cand = trace
        .events
        .iter()
        .find(|e| e.task_id == "cand" && e.kind.name() == "start")
        .unwrap()
        .time;
    assert!((finish_cur - drain.time - current_remaining).abs() < 1e-6);
    assert!((start_cand - finish_cur).abs() < 1e-6);
    assert_eq!(trace.tasks["cur"].preemptions, 0, "drain must not preempt");
    pass(3, &format!(
        "8 MiB checkpoint = 16503 cycles = {us:.1} us; kill = 0; drain wait = remaining ({:.0} cycles)",
        current_remaining
    ));
}

#[test]
fn criterion_04_scheduler_unit_fidelity() {
    let cfg = SchedulerConfig::default();
    // Threshold: max tokens 8 rounds down to level 3.
    let mut tasks: Vec<TaskContext> = (0..3)
        .map(|i| TaskContext::new(format!("t{i}"), Priority::Low, 1e6, 0.0, i))
        .collect();
    tasks[0].tokens = 8.0;
    tasks[1].tokens = 2.0;
    tasks[2].tokens = 1.0;
    assert_eq!(prema_threshold(tasks.iter(), &cfg), 3.0);

    // Mechanism selection on the worked examples (times in ms-equivalents;
    // the decision is scale invariant).
    let task = |est: f64, exec: f64, idx: usize| {
        let mut t = TaskContext::new(format!("x{idx}"), Priority::Low, est, 0.0, idx);
        t.time_executed = exec;
        t
    };
    let drain = choose_mechanism(&task(10.0, 9.0, 0), &task(5.0, 0.0, 1));
    assert_eq!(drain, Mechanism::Drain);
    let ckpt = choose_mechanism(&task(10.0, 1.0, 0), &task(1.0, 0.0, 1));
    assert_eq!(ckpt, Mechanism::Checkpoint);
    pass(4, "threshold(max=8) = 3; mechanism selection returns drain/checkpoint on the worked pairs");
}

#[test]
fn criterion_05_metrics_fidelity_and_ntt_bound() {
    use npusim::trace::{SimTrace, TaskSummary};
    let build = |entries: &[(&str, f64, f64, &'static str, f64)]| {
        let mut trace = SimTrace::default();
        let mut solo = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for &(id, c_single, c_multi, priority, w) in entries {
            trace.tasks.insert(
                id.to_string(),
                TaskSummary {
                    priority,
                    dispatch_time: 0.0,
                    finish_time: c_multi,
                    solo_cycles: c_single,
                    ..TaskSummary::default()
                },
            );
            solo.insert(id.to_string(), c_single);
            weights.insert(id.to_string(), w);
        }
        compute_metrics(&trace, &solo, &weights).unwrap()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);

    // One task alone.
    let r = build(&[("a", 1000.0, 1000.0, "low", 1.0)]);
    assert!(rel(r.antt, 1.0) < 1e-9 && rel(r.stp, 1.0) < 1e-9 && rel(r.fairness, 1.0) < 1e-9);
    // Two equal-priority tasks each slowed 2x.
    let r = build(&[
        ("a", 1000.0, 2000.0, "low", 1.0),
        ("b", 500.0, 1000.0, "low", 1.0),
    ]);
    assert!(rel(r.antt, 2.0) < 1e-9 && rel(r.stp, 1.0) < 1e-9 && rel(r.fairness, 1.0) < 1e-9);
    // Priorities {1,9}, speedups {0.5,0.8}.
    let r = build(&[
        ("a", 500.0, 1000.0, "low", 1.0),
        ("b", 800.0, 1000.0, "high", 9.0),
    ]);
    assert!(rel(r.fairness, (0.8 / 0.9) / 5.0) < 1e-9);

    // NTT versus solo >= 1 for every task in every sweep run.
    let grid = sweep();
    let mut runs = 0usize;
    let mut checked = 0usize;
    for cell in grid.values().flatten() {
        runs += 1;
        for &(_, c_single, c_multi) in &cell.tasks {
            assert!(c_multi / c_single >= 1.0 - 1e-9);
            checked += 1;
        }
    }
    assert!(runs >= 300, "property suite must cover >= 300 runs, got {runs}");
    pass(5, &format!(
        "worked metrics examples at 1e-9; NTT >= 1 for {checked} tasks across {runs} runs"
    ));
}

#[test]
fn criterion_06_policy_ordering() {
    let grid = sweep();
    // (a) The oracle achieves the best mean ANTT of all policies, under both
    // complete mechanism grids.
    for mech in ["checkpoint", "dynamic"] {
        let oracle = mean_antt(grid, "sjf-oracle", mech);
        for policy in Policy::ALL {
            let antt = mean_antt(grid, policy.as_str(), mech);
            assert!(
                oracle <= antt + 1e-9,
                "{mech}: sjf-oracle {oracle} vs {} {antt}",
                policy.as_str()
            );
        }
    }
    // (b) The token scheduler reaches at least 85% of the oracle's ANTT.
    let oracle = mean_antt(grid, "sjf-oracle", "dynamic");
    let prema = mean_antt(grid, "prema", "dynamic");
    let ratio = oracle / prema;
    assert!(
        ratio >= 0.85,
        "prema reaches only {ratio:.3} of the latency-optimal oracle"
    );
    // (c) Strict improvement over non-preemptive FCFS on all three metrics.
    let agg = |policy: &str, mech: &str, f: &dyn Fn(&Cell) -> f64| -> f64 {
        let cells: Vec<f64> = grid
            .iter()
            .filter(|((p, m, _), c)| *p == policy && *m == mech && c.is_some())
            .map(|(_, c)| f(c.as_ref().unwrap()))
            .collect();
        cells.iter().sum::<f64>() / cells.len() as f64
    };
    let antt_gain = agg("fcfs", "checkpoint", &|c| c.antt) / agg("prema", "dynamic", &|c| c.antt);
    let stp_gain = agg("prema", "dynamic", &|c| c.stp) / agg("fcfs", "checkpoint", &|c| c.stp);
    let fair_gain =
        agg("prema", "dynamic", &|c| c.fairness) / agg("fcfs", "checkpoint", &|c| c.fairness);
    assert!(antt_gain > 1.0 && stp_gain > 1.0 && fair_gain > 1.0);
    // (d) Dynamic mechanism selection weakly dominates always-checkpoint on
    // mean ANTT across the grid.
    let grid_mean = |mech: &str| -> f64 {
        let cells: Vec<f64> = grid
            .iter()
            .filter(|((_, m, _), c)| *m == mech && c.is_some())
            .map(|(_, c)| c.as_ref().unwrap().antt)
            .collect();
        cells.iter().sum::<f64>() / cells.len() as f64
    };
    let dynamic = grid_mean("dynamic");
    let checkpoint = grid_mean("checkpoint");
    assert!(dynamic <= checkpoint + 1e-9, "{dynamic} vs {checkpoint}");
    pass(6, &format!(
        "oracle best; prema/oracle ratio {ratio:.3} >= 0.85; prema vs fcfs gains \
         antt {antt_gain:.2}x stp {stp_gain:.2}x fairness {fair_gain:.2}x; \
         grid ANTT dynamic {dynamic:.2} <= checkpoint {checkpoint:.2}"
    ));
}

#[test]
fn criterion_07_checkpoint_beats_kill_on_stp() {
    let grid = sweep();
    // Mean STP over (policy, seed) cells that completed under both
    // mechanisms (rr livelocks under kill and is excluded with its pair).
    let mut ckpt = Vec::new();
    let mut kill = Vec::new();
    for policy in Policy::ALL {
        for seed in 0..SEEDS {
            let c = grid[&(policy.as_str(), "checkpoint", seed)].as_ref();
            let k = grid[&(policy.as_str(), "kill", seed)].as_ref();
            if let (Some(c), Some(k)) = (c, k) {
                ckpt.push(c.stp);
                kill.push(k.stp);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mk) = (mean(&ckpt), mean(&kill));
    assert!(mc > mk, "checkpoint {mc} vs kill {mk}");
    pass(7, &format!(
        "mean STP checkpoint {mc:.3} > kill {mk:.3} over {} paired cells",
        ckpt.len()
    ));
}

#[test]
fn criterion_08_sla_curve_shape() {
    let grid = sweep();
    // Pooled violation rate per policy at the default mechanism, swept over
    // N in 2..=20: monotone non-increasing, and prema beats fcfs at N = 4.
    let pooled_rate = |policy: &str, n: f64| -> f64 {
        let mut violated = 0usize;
        let mut total = 0usize;
        for ((p, m, _), cell) in grid.iter() {
            if *p != policy || *m != "dynamic" {
                continue;
            }
            let cell = cell.as_ref().unwrap();
            for &(_, c_single, c_multi) in &cell.tasks {
                total += 1;
                if c_multi > n * c_single {
                    violated += 1;
                }
            }
        }
        violated as f64 / total as f64
    };
    for policy in Policy::ALL {
        let mut prev = f64::INFINITY;
        for n in 2..=20 {
            let r = pooled_rate(policy.as_str(), n as f64);
            assert!(
                r <= prev + 1e-12,
                "{}: rate rose from {prev} to {r} at N={n}",
                policy.as_str()
            );
            prev = r;
        }
    }
    let prema4 = pooled_rate("prema", 4.0);
    let fcfs4 = pooled_rate("fcfs", 4.0);
    assert!(prema4 < fcfs4, "prema {prema4} vs fcfs {fcfs4} at N=4");
    pass(8, &format!(
        "violation rate monotone in N for every policy; at N=4 prema {prema4:.3} < fcfs {fcfs4:.3}"
    ));
}

// Criterion 9 (byte-identical reruns of CLI manifests) lives in the CLI
// crate's acceptance suite, next to the binary it exercises.

#[test]
fn criterion_10_rnn_lut() {
    // Geomean worked example.
    let lut = build_lut(&SeqLenProfile {
        name: "t".into(),
        entries: vec![(10, 8), (10, 12), (10, 18)],
    })
    .unwrap();
    assert!((lut.geomean(10) - 12.0).abs() < 1e-9);
    assert_eq!(lut.predict_unroll(10), 12);

    // Linear-profile identity for all profiled lengths.
    let entries: Vec<(u64, u64)> = (1..=64).map(|l| (l, l)).collect();
    let linear = build_lut(&SeqLenProfile {
        name: "lin".into(),
        entries,
    })
    .unwrap();
    for l in 1..=64 {
        assert_eq!(linear.predict_unroll(l), l);
    }

    // Uniformity of sample_actual: chi-square over 1e5 draws, 3 categories,
    // alpha = 0.01 (df = 2, critical value 9.210).
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut counts = BTreeMap::new();
    let draws = 100_000usize;
    for _ in 0..draws {
        *counts.entry(lut.sample_actual(10, &mut rng)).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 3);
    let expected = draws as f64 / 3.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    assert!(chi2 < 9.210, "chi-square {chi2} rejects uniformity at alpha=0.01");
    pass(10, &format!(
        "geomean(8,12,18) = 12; linear identity holds; chi-square {chi2:.2} < 9.21"
    ));
}

/// Directional tail-latency check: the 95th-percentile completion of
/// high-priority tasks, pooled across the sweep, is no better under
/// non-preemptive FCFS than under the token scheduler.
#[test]
fn high_priority_tail_latency_orders_fcfs_above_prema() {
    let grid = sweep();
    let pooled_p95 = |policy: &str, mech: &str| -> f64 {
        let mut highs: Vec<f64> = grid
            .iter()
            .filter(|((p, m, _), c)| *p == policy && *m == mech && c.is_some())
            .flat_map(|(_, c)| c.as_ref().unwrap().tasks.iter())
            .filter(|(priority, _, _)| *priority == "high")
            .map(|&(_, _, c_multi)| c_multi)
            .collect();
        assert!(!highs.is_empty());
        highs.sort_by(f64::total_cmp);
        let rank = (0.95 * highs.len() as f64).ceil() as usize;
        highs[rank.clamp(1, highs.len()) - 1]
    };
    let fcfs = pooled_p95("fcfs", "checkpoint");
    let prema = pooled_p95("prema", "dynamic");
    assert!(
        fcfs >= prema,
        "fcfs p95 {fcfs} should not beat prema p95 {prema}"
    );
    println!(
        "[PASS] auxiliary: pooled high-priority p95 fcfs {:.0} >= prema {:.0} cycles",
        fcfs, prema
    );
}
