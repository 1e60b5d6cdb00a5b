//! Command-line front end: run one simulation, sweep the policy x mechanism
//! grid, predict inference times, generate workloads, and inspect profiles.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use npusim::lut::SeqLenProfile;
use npusim::metrics::{compute_metrics, format_n, sla_violation_rate, tail_latency};
use npusim::model::{model_from_toml, ModelLibrary};
use npusim::predict::{tile_counts, TileMode};
use npusim::sched::{MechanismMode, Policy, SchedulerConfig};
use npusim::task::Priority;
use npusim::trace::SimTrace;
use npusim::workload::{estimated_time, generate, SoloCache, Workload};
use npusim::{run_simulation, NpuConfig};

#[derive(Parser)]
#[command(name = "npusim", version, about = "Preemptible NPU multi-tasking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one workload under one policy and write trace, summary, and
    /// metrics files.
    Simulate(SimulateArgs),
    /// Run the policy x mechanism grid over seeded workloads and write
    /// summary tables plus figure-ready data files.
    Sweep(SweepArgs),
    /// Print the predicted inference time of a model.
    Predict(PredictArgs),
    /// Generate a seeded random workload file.
    GenWorkload(GenWorkloadArgs),
    /// Build a sequence-length lookup table from a profile and print it.
    BuildLut(BuildLutArgs),
}

#[derive(Args)]
struct CommonSim {
    /// NPU config TOML; defaults to the built-in reference machine.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of extra model TOML files (added to the built-in library).
    #[arg(long)]
    models_dir: Option<PathBuf>,
    /// Directory of extra profile files (loaded before models).
    #[arg(long)]
    profiles_dir: Option<PathBuf>,
    /// Scheduling period time-quota in microseconds.
    #[arg(long, default_value_t = 250.0)]
    period_us: f64,
    /// SLA multiplier N; repeat for several columns.
    #[arg(long = "sla-n")]
    sla_n: Vec<f64>,
    /// Tail-latency percentile.
    #[arg(long, default_value_t = 95.0)]
    percentile: f64,
    /// Experimental: deduct the candidacy threshold from a task's tokens
    /// whenever it is scheduled.
    #[arg(long, default_value_t = false)]
    debit_tokens: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonSim,
    /// Workload TOML file.
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, default_value = "prema", value_parser = parse_policy)]
    policy: Policy,
    #[arg(long, default_value = "dynamic", value_parser = parse_mechanism)]
    mechanism: MechanismMode,
    /// Recorded in the metrics row; defaults to the workload's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonSim,
    /// Comma-separated policies.
    #[arg(long, default_value = "fcfs,rr,hpf,token,sejf,sjf-oracle,prema")]
    policies: String,
    /// Comma-separated mechanisms.
    #[arg(long, default_value = "checkpoint,kill,dynamic")]
    mechanisms: String,
    /// Number of seeded workloads (seeds 0..n).
    #[arg(long, default_value_t = 25)]
    seeds: u64,
    /// Tasks per workload.
    #[arg(long, default_value_t = 8)]
    tasks: usize,
    /// Dispatch window in microseconds.
    #[arg(long, default_value_t = 10_000.0)]
    window_us: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonSim,
    /// Built-in model name or path to a model TOML file.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 1)]
    batch: u64,
    /// Input sequence length (recurrent models only).
    #[arg(long)]
    input_len: Option<u64>,
}

#[derive(Args)]
struct GenWorkloadArgs {
    #[command(flatten)]
    common: CommonSim,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    tasks: usize,
    /// Dispatch window in microseconds.
    #[arg(long, default_value_t = 10_000.0)]
    window_us: f64,
    /// Output workload file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildLutArgs {
    /// Profile file (`input_len,output_len` per line, `#` comments).
    #[arg(long)]
    profile: PathBuf,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s)
        .ok_or_else(|| format!("unknown policy `{s}` (fcfs|rr|hpf|token|sejf|sjf-oracle|prema)"))
}

fn parse_mechanism(s: &str) -> Result<MechanismMode, String> {
    MechanismMode::parse(s)
        .ok_or_else(|| format!("unknown mechanism `{s}` (checkpoint|kill|dynamic)"))
}

/// Validation failures exit 1, runtime failures exit 2.
fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if let Some(e) = err.downcast_ref::<npusim::Error>() {
        match e {
            npusim::Error::Simulation(_) | npusim::Error::Io(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Predict(args) => cmd_predict(args),
        Command::GenWorkload(args) => cmd_gen_workload(args),
        Command::BuildLut(args) => cmd_build_lut(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared setup
// ---------------------------------------------------------------------------

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<NpuConfig> {
    match path {
        None => Ok(NpuConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                anyhow::anyhow!(npusim::Error::Parse(format!("{}: {e}", p.display())))
            })?;
            Ok(NpuConfig::from_toml(&text)?)
        }
    }
}

fn load_library(common: &CommonSim) -> anyhow::Result<ModelLibrary> {
    let mut lib = ModelLibrary::builtin();
    if let Some(dir) = &common.profiles_dir {
        for path in sorted_dir(dir, "csv")? {
            let text = fs::read_to_string(&path)?;
            lib.add_profile(SeqLenProfile::parse(&text)?)?;
        }
    }
    if let Some(dir) = &common.models_dir {
        for path in sorted_dir(dir, "toml")? {
            let text = fs::read_to_string(&path)?;
            lib.add_model(model_from_toml(&text)?)?;
        }
    }
    Ok(lib)
}

fn sorted_dir(dir: &Path, ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| anyhow::anyhow!(npusim::Error::Parse(format!("{}: {e}", dir.display()))))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == ext).unwrap_or(false))
        .collect();
    paths.sort();
    Ok(paths)
}

fn sched_config(
    common: &CommonSim,
    policy: Policy,
    mechanism: MechanismMode,
    cfg: &NpuConfig,
) -> SchedulerConfig {
    SchedulerConfig {
        period_cycles: cfg.us_to_cycles(common.period_us),
        policy,
        mechanism_mode: mechanism,
        debit_tokens_on_schedule: common.debit_tokens,
        ..SchedulerConfig::default()
    }
}

fn sla_values(common: &CommonSim) -> Vec<f64> {
    if common.sla_n.is_empty() {
        vec![2.0, 4.0, 8.0, 16.0]
    } else {
        common.sla_n.clone()
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct RunRow {
    policy: Policy,
    mechanism: MechanismMode,
    seed: u64,
    n_tasks: usize,
    antt: f64,
    stp: f64,
    fairness: f64,
    sla: BTreeMap<String, f64>,
    p_high: Option<f64>,
}

fn metrics_header(sla_n: &[f64], percentile: f64) -> String {
    let mut h = String::from("policy,mechanism,seed,n_tasks,antt,stp,fairness");
    for n in sla_n {
        h.push_str(&format!(",sla@{}", format_n(*n)));
    }
    h.push_str(&format!(",p{}_high_cycles\n", format_n(percentile)));
    h
}

impl RunRow {
    fn to_csv(&self, sla_n: &[f64]) -> String {
        let mut row = format!(
            "{},{},{},{},{:.6},{:.6},{:.6}",
            self.policy.as_str(),
            self.mechanism.as_str(),
            self.seed,
            self.n_tasks,
            self.antt,
            self.stp,
            self.fairness
        );
        for n in sla_n {
            row.push_str(&format!(",{:.6}", self.sla[&format_n(*n)]));
        }
        match self.p_high {
            Some(v) => row.push_str(&format!(",{v:.3}\n")),
            None => row.push_str(",na\n"),
        }
        row
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    workload: &Workload,
    lib: &ModelLibrary,
    cfg: &NpuConfig,
    sched: &SchedulerConfig,
    solo: &BTreeMap<String, f64>,
    sla_n: &[f64],
    percentile: f64,
    seed: u64,
) -> anyhow::Result<(SimTrace, RunRow)> {
    let trace = run_simulation(workload, lib, cfg, sched, Some(solo))?;
    let weights: BTreeMap<String, f64> = workload
        .tasks
        .iter()
        .map(|t| (t.id.clone(), sched.priority_tokens(t.priority)))
        .collect();
    let report = compute_metrics(&trace, solo, &weights)?;
    let sla = sla_violation_rate(&trace, solo, sla_n)?;
    let p_high = tail_latency(&trace, percentile, Some(Priority::High)).ok();
    let row = RunRow {
        policy: sched.policy,
        mechanism: sched.mechanism_mode,
        seed,
        n_tasks: workload.tasks.len(),
        antt: report.antt,
        stp: report.stp,
        fairness: report.fairness,
        sla,
        p_high,
    };
    Ok((trace, row))
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.common.config)?;
    let lib = load_library(&args.common)?;
    let text = fs::read_to_string(&args.workload).map_err(|e| {
        anyhow::anyhow!(npusim::Error::Parse(format!(
            "{}: {e}",
            args.workload.display()
        )))
    })?;
    let workload = Workload::from_toml(&text)?;
    workload.validate(&lib)?;
    let sched = sched_config(&args.common, args.policy, args.mechanism, &cfg);
    let sla_n = sla_values(&args.common);
    let seed = args.seed.unwrap_or(workload.seed);

    let mut cache = SoloCache::new();
    let solo = cache.solo_map(&workload, &lib, &cfg, &sched)?;
    let (trace, row) = run_one(
        &workload,
        &lib,
        &cfg,
        &sched,
        &solo,
        &sla_n,
        args.common.percentile,
        seed,
    )?;

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("trace.csv"), trace.event_log())?;
    fs::write(args.out.join("summary.csv"), trace.summary_table())?;
    let mut metrics = metrics_header(&sla_n, args.common.percentile);
    metrics.push_str(&row.to_csv(&sla_n));
    fs::write(args.out.join("metrics.csv"), metrics)?;
    for warning in &trace.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "policy={} mechanism={} tasks={} antt={:.4} stp={:.4} fairness={:.4} \
         makespan={:.0} cycles ({:.3} ms)",
        sched.policy.as_str(),
        sched.mechanism_mode.as_str(),
        workload.tasks.len(),
        row.antt,
        row.stp,
        row.fairness,
        trace.makespan,
        cfg.cycles_to_us(trace.makespan) / 1000.0
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct CellOutcome {
    row: Option<RunRow>,
    error: Option<String>,
    policy: Policy,
    mechanism: MechanismMode,
    seed: u64,
    /// (priority, c_single, c_multi) per task.
    task_stats: Vec<(String, f64, f64)>,
    /// (mechanism, latency) per preempt event.
    preempt_latencies: Vec<(String, f64)>,
    /// Dispatch-to-first-service wait per task.
    waits: Vec<f64>,
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.common.config)?;
    let lib = load_library(&args.common)?;
    let policies: Vec<Policy> = args
        .policies
        .split(',')
        .map(|s| parse_policy(s.trim()).map_err(|e| anyhow::anyhow!(npusim::Error::Parse(e))))
        .collect::<anyhow::Result<_>>()?;
    let mechanisms: Vec<MechanismMode> = args
        .mechanisms
        .split(',')
        .map(|s| parse_mechanism(s.trim()).map_err(|e| anyhow::anyhow!(npusim::Error::Parse(e))))
        .collect::<anyhow::Result<_>>()?;
    if policies.is_empty() || mechanisms.is_empty() || args.seeds == 0 {
        return Err(anyhow::anyhow!(npusim::Error::Parse(
            "sweep grid is empty".into()
        )));
    }
    let sla_n = sla_values(&args.common);
    let window_cycles = cfg.us_to_cycles(args.window_us).round() as u64;

    // Workloads and solo baselines first (memoized across the grid), then
    // the independent cells in parallel.
    let mut cache = SoloCache::new();
    let mut per_seed = Vec::new();
    for seed in 0..args.seeds {
        let workload = generate(seed, args.tasks, window_cycles, &lib)?;
        let solo = cache.solo_map(
            &workload,
            &lib,
            &cfg,
            &sched_config(&args.common, Policy::Fcfs, MechanismMode::StaticCheckpoint, &cfg),
        )?;
        per_seed.push((seed, workload, solo));
    }

    let mut cells: Vec<(usize, Policy, MechanismMode)> = Vec::new();
    for (i, _) in per_seed.iter().enumerate() {
        for &p in &policies {
            for &m in &mechanisms {
                cells.push((i, p, m));
            }
        }
    }

    let mut outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(i, policy, mechanism)| {
            let (seed, workload, solo) = &per_seed[i];
            let sched = sched_config(&args.common, policy, mechanism, &cfg);
            match run_one(
                workload,
                &lib,
                &cfg,
                &sched,
                solo,
                &sla_n,
                args.common.percentile,
                *seed,
            ) {
                Ok((trace, row)) => {
                    let task_stats = trace
                        .tasks
                        .iter()
                        .map(|(id, s)| (s.priority.to_string(), solo[id], s.c_multi()))
                        .collect();
                    let mut preempt_latencies = Vec::new();
                    let mut first_start: BTreeMap<String, f64> = BTreeMap::new();
                    for ev in trace.sorted_events() {
                        match &ev.kind {
                            npusim::trace::EventKind::Preempt {
                                mechanism, latency, ..
                            } => preempt_latencies
                                .push((mechanism.as_str().to_string(), *latency)),
                            npusim::trace::EventKind::Start
                            | npusim::trace::EventKind::Resume { .. } => {
                                first_start.entry(ev.task_id.clone()).or_insert(ev.time);
                            }
                            _ => {}
                        }
                    }
                    let waits = trace
                        .tasks
                        .iter()
                        .filter_map(|(id, s)| first_start.get(id).map(|t| t - s.dispatch_time))
                        .collect();
                    CellOutcome {
                        row: Some(row),
                        error: None,
                        policy,
                        mechanism,
                        seed: *seed,
                        task_stats,
                        preempt_latencies,
                        waits,
                    }
                }
                Err(err) => CellOutcome {
                    row: None,
                    error: Some(err.to_string()),
                    policy,
                    mechanism,
                    seed: *seed,
                    task_stats: Vec::new(),
                    preempt_latencies: Vec::new(),
                    waits: Vec::new(),
                },
            }
        })
        .collect();
    outcomes.sort_by_key(|o| (o.policy.as_str(), o.mechanism.as_str(), o.seed));

    // Per-seed NP-FCFS baselines for the normalized columns.
    let mut fcfs_baseline: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
    for o in &outcomes {
        if o.policy == Policy::Fcfs {
            if let Some(row) = &o.row {
                fcfs_baseline
                    .entry(o.seed)
                    .or_insert((row.antt, row.stp, row.fairness));
            }
        }
    }

    fs::create_dir_all(&args.out)?;

    // Main per-cell table.
    let mut table = metrics_header(&sla_n, args.common.percentile)
        .trim_end()
        .to_string();
    table.push_str(",status,antt_improvement_vs_fcfs,stp_vs_fcfs,fairness_vs_fcfs\n");
    let mut failures = 0usize;
    for o in &outcomes {
        match (&o.row, &o.error) {
            (Some(row), _) => {
                let mut line = row.to_csv(&sla_n).trim_end().to_string();
                match fcfs_baseline.get(&o.seed) {
                    Some((a, s, f)) => line.push_str(&format!(
                        ",ok,{:.6},{:.6},{:.6}",
                        a / row.antt,
                        row.stp / s,
                        row.fairness / f
                    )),
                    None => line.push_str(",ok,na,na,na"),
                }
                line.push('\n');
                table.push_str(&line);
            }
            (None, Some(err)) => {
                failures += 1;
                eprintln!(
                    "cell failed: policy={} mechanism={} seed={}: {err}",
                    o.policy.as_str(),
                    o.mechanism.as_str(),
                    o.seed
                );
                table.push_str(&format!(
                    "{},{},{},{},na,na,na{},na,failed,na,na,na\n",
                    o.policy.as_str(),
                    o.mechanism.as_str(),
                    o.seed,
                    args.tasks,
                    ",na".repeat(sla_n.len())
                ));
            }
            (None, None) => unreachable!(),
        }
    }
    fs::write(args.out.join("sweep.csv"), &table)?;

    // Figure analogue: normalized metrics per policy x mechanism, mean and
    // spread across seeds.
    let mut norm = String::from(
        "policy,mechanism,antt_improvement,stp_improvement,fairness_improvement,\
         antt_improvement_std,stp_improvement_std,fairness_improvement_std,cells\n",
    );
    let mean_std = |v: &[f64]| -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    for &p in &policies {
        for &m in &mechanisms {
            let mut rows: Vec<(f64, f64, f64)> = Vec::new();
            for o in &outcomes {
                if o.policy == p && o.mechanism == m {
                    if let (Some(row), Some((a, s, f))) = (&o.row, fcfs_baseline.get(&o.seed)) {
                        rows.push((a / row.antt, row.stp / s, row.fairness / f));
                    }
                }
            }
            if rows.is_empty() {
                norm.push_str(&format!("{},{},na,na,na,na,na,na,0\n", p.as_str(), m.as_str()));
                continue;
            }
            let antt: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let stp: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let fair: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let (am, asd) = mean_std(&antt);
            let (sm, ssd) = mean_std(&stp);
            let (fm, fsd) = mean_std(&fair);
            norm.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
                p.as_str(),
                m.as_str(),
                am,
                sm,
                fm,
                asd,
                ssd,
                fsd,
                rows.len()
            ));
        }
    }
    fs::write(args.out.join("fig_norm_metrics.csv"), &norm)?;

    // Figure analogue: SLA violation curve, pooled over seeds.
    let mut sla_curve = String::from("policy,mechanism,n,violation_rate\n");
    for &p in &policies {
        for &m in &mechanisms {
            for n in 2..=20u32 {
                let mut violated = 0usize;
                let mut total = 0usize;
                for o in &outcomes {
                    if o.policy == p && o.mechanism == m && o.row.is_some() {
                        for (_, c_single, c_multi) in &o.task_stats {
                            total += 1;
                            if *c_multi > n as f64 * c_single {
                                violated += 1;
                            }
                        }
                    }
                }
                if total > 0 {
                    sla_curve.push_str(&format!(
                        "{},{},{},{:.6}\n",
                        p.as_str(),
                        m.as_str(),
                        n,
                        violated as f64 / total as f64
                    ));
                }
            }
        }
    }
    fs::write(args.out.join("fig_sla_curve.csv"), &sla_curve)?;

    // Figure analogue: preemption latency and first-service wait time.
    let mut lat = String::from(
        "mechanism,preemptions,mean_preempt_latency_us,max_preempt_latency_us,mean_first_wait_us\n",
    );
    for &m in &mechanisms {
        let mut lats = Vec::new();
        let mut waits = Vec::new();
        for o in &outcomes {
            if o.mechanism == m {
                lats.extend(o.preempt_latencies.iter().map(|(_, l)| *l));
                waits.extend(o.waits.iter().copied());
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let max = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
        lat.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3}\n",
            m.as_str(),
            lats.len(),
            cfg.cycles_to_us(mean(&lats)),
            cfg.cycles_to_us(max(&lats)),
            cfg.cycles_to_us(mean(&waits)),
        ));
    }
    fs::write(args.out.join("fig_preemption_latency.csv"), &lat)?;

    println!(
        "sweep complete: {} cells ({} failed), outputs in {}",
        outcomes.len(),
        failures,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

fn cmd_predict(args: PredictArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.common.config)?;
    let lib = load_library(&args.common)?;
    let model = if args.model.ends_with(".toml") || args.model.contains('/') {
        let text = fs::read_to_string(&args.model)
            .map_err(|e| anyhow::anyhow!(npusim::Error::Parse(format!("{}: {e}", args.model))))?;
        model_from_toml(&text)?
    } else {
        lib.model(&args.model)?.clone()
    };

    let (unroll, unroll_note) = if model.family.is_recurrent() {
        let input_len = args.input_len.ok_or_else(|| {
            anyhow::anyhow!(npusim::Error::Model {
                model: model.name.clone(),
                msg: "recurrent model requires --input-len".into(),
            })
        })?;
        let lut = lib.profile_for(&model)?;
        let predicted = lut.predict_unroll(input_len);
        let obs = lut.observed(input_len);
        (
            Some(predicted),
            Some(format!(
                "predicted unroll: {predicted} (observed range [{}, {}] for input length {input_len})",
                obs.first().unwrap(),
                obs.last().unwrap()
            )),
        )
    } else {
        if args.input_len.is_some() {
            return Err(anyhow::anyhow!(npusim::Error::Model {
                model: model.name.clone(),
                msg: "--input-len is only valid for recurrent models".into(),
            }));
        }
        (None, None)
    };

    let instance = model.with_batch(args.batch)?;
    for warning in instance.capacity_warnings(&cfg) {
        eprintln!("warning: {warning}");
    }
    println!("model {} batch {}", model.name, args.batch);
    let indices = instance.effective_layer_indices(unroll.unwrap_or(1));
    for (pos, idx) in indices.iter().enumerate() {
        let l = &instance.layers[*idx];
        let tb = tile_counts(l.m, l.k, l.n, &cfg, TileMode::Generalized);
        println!(
            "layer {:3}: m={} k={} n={} tiles={} cycles={:.1}",
            pos,
            l.m,
            l.k,
            l.n,
            tb.total_tiles(),
            tb.total_cycles()
        );
    }
    if let Some(note) = unroll_note {
        println!("{note}");
    }
    let total =
        npusim::predict::predict_network_time(&instance, &cfg, unroll, TileMode::Generalized)?;
    println!("total: {total} cycles / {:.3} us", cfg.cycles_to_us(total));
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-workload / build-lut
// ---------------------------------------------------------------------------

fn cmd_gen_workload(args: GenWorkloadArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.common.config)?;
    let lib = load_library(&args.common)?;
    let window_cycles = cfg.us_to_cycles(args.window_us).round() as u64;
    let workload = generate(args.seed, args.tasks, window_cycles, &lib)?;
    let mut preview = String::new();
    for t in &workload.tasks {
        let est = estimated_time(t, &lib, &cfg)?;
        preview.push_str(&format!(
            "# {}: {} batch {} {} dispatch {} estimated {:.0} cycles\n",
            t.id,
            t.model,
            t.batch,
            t.priority.as_str(),
            t.dispatch_cycles,
            est
        ));
    }
    let text = workload.to_toml();
    match &args.out {
        Some(path) => {
            fs::write(path, &text)?;
            eprint!("{preview}");
            println!("wrote {} tasks to {}", workload.tasks.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_build_lut(args: BuildLutArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.profile).map_err(|e| {
        anyhow::anyhow!(npusim::Error::Parse(format!(
            "{}: {e}",
            args.profile.display()
        )))
    })?;
    let profile = SeqLenProfile::parse(&text)?;
    let lut = npusim::lut::build_lut(&profile)?;
    println!(
        "profile {} ({} observations)",
        profile.name,
        profile.entries.len()
    );
    println!("input_len,geomean,predicted_unroll,observed_min,observed_max,observations");
    for input in lut.input_lengths() {
        let obs = lut.observed(input);
        println!(
            "{},{:.4},{},{},{},{}",
            input,
            lut.geomean(input),
            lut.predict_unroll(input),
            obs.first().unwrap(),
            obs.last().unwrap(),
            obs.len()
        );
    }
    Ok(())
}
