#!/usr/bin/env python3
"""Render sweep outputs into plots (PNG if matplotlib is available, ASCII
otherwise).

Usage:
    python3 scripts/plot_sweep.py <sweep-output-dir> [--check] [--out DIR]

--check only validates that the expected files and columns are present and
exits non-zero if the format contract is broken.
"""

import argparse
import csv
import os
import sys

EXPECTED = {
    "sweep.csv": [
        "policy",
        "mechanism",
        "seed",
        "n_tasks",
        "antt",
        "stp",
        "fairness",
        "status",
        "antt_improvement_vs_fcfs",
        "stp_vs_fcfs",
        "fairness_vs_fcfs",
    ],
    "fig_norm_metrics.csv": [
        "policy",
        "mechanism",
        "antt_improvement",
        "stp_improvement",
        "fairness_improvement",
        "cells",
    ],
    "fig_sla_curve.csv": ["policy", "mechanism", "n", "violation_rate"],
    "fig_preemption_latency.csv": [
        "mechanism",
        "preemptions",
        "mean_preempt_latency_us",
        "max_preempt_latency_us",
        "mean_first_wait_us",
    ],
}


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def check(indir):
    ok = True
    for name, columns in EXPECTED.items():
        path = os.path.join(indir, name)
        if not os.path.exists(path):
            print(f"missing {path}", file=sys.stderr)
            ok = False
            continue
        rows = read_rows(path)
        if not rows:
            print(f"{name}: no data rows", file=sys.stderr)
            ok = False
            continue
        have = rows[0].keys()
        for col in columns:
            if col not in have:
                print(f"{name}: missing column {col}", file=sys.stderr)
                ok = False
    return ok


def ascii_bars(title, labels, values, width=48):
    print(f"\n{title}")
    top = max(values) if values else 1.0
    for label, value in zip(labels, values):
        bar = "#" * max(1, int(width * value / top)) if top > 0 else ""
        print(f"  {label:24} {value:10.3f} {bar}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("indir")
    parser.add_argument("--check", action="store_true")
    parser.add_argument("--out", default=None, help="directory for PNGs")
    args = parser.parse_args()

    if not check(args.indir):
        sys.exit(1)
    if args.check:
        print("sweep output format ok")
        return

    norm = read_rows(os.path.join(args.indir, "fig_norm_metrics.csv"))
    sla = read_rows(os.path.join(args.indir, "fig_sla_curve.csv"))
    lat = read_rows(os.path.join(args.indir, "fig_preemption_latency.csv"))

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        plt = None

    if plt is None:
        for metric in ("antt_improvement", "stp_improvement", "fairness_improvement"):
            rows = [r for r in norm if r[metric] != "na"]
            ascii_bars(
                f"{metric} vs np-fcfs (higher is better)",
                [f"{r['policy']}/{r['mechanism']}" for r in rows],
                [float(r[metric]) for r in rows],
            )
        ascii_bars(
            "mean preemption latency (us)",
            [r["mechanism"] for r in lat],
            [float(r["mean_preempt_latency_us"]) for r in lat],
        )
        return

    outdir = args.out or args.indir
    os.makedirs(outdir, exist_ok=True)

    for metric in ("antt_improvement", "stp_improvement", "fairness_improvement"):
        rows = [r for r in norm if r[metric] != "na"]
        fig, ax = plt.subplots(figsize=(10, 4))
        labels = [f"{r['policy']}\n{r['mechanism']}" for r in rows]
        ax.bar(range(len(rows)), [float(r[metric]) for r in rows])
        ax.set_xticks(range(len(rows)), labels, fontsize=7)
        ax.axhline(1.0, color="gray", linewidth=0.8)
        ax.set_ylabel(f"{metric} vs np-fcfs")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, f"{metric}.png"), dpi=120)
        plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    series = {}
    for r in sla:
        series.setdefault(f"{r['policy']}/{r['mechanism']}", []).append(
            (int(r["n"]), float(r["violation_rate"]))
        )
    for label, points in sorted(series.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], label=label, linewidth=1)
    ax.set_xlabel("SLA target N (x isolated time)")
    ax.set_ylabel("violation rate")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "sla_curve.png"), dpi=120)
    plt.close(fig)
    print(f"plots written to {outdir}")


if __name__ == "__main__":
    main()
