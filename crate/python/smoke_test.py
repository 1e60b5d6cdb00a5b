#!/usr/bin/env python3
"""Smoke test for the npusim_py extension module.

Builds nothing itself: run `cargo build -p npusim-py` first (or pass
--release and build in release mode). The script locates the cdylib under
target/, exposes it as an importable module, and drives the main entry
points end to end.
"""

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module(profile):
    libname = "libnpusim_py.so"
    if sys.platform == "darwin":
        libname = "libnpusim_py.dylib"
    elif sys.platform.startswith("win"):
        libname = "npusim_py.dll"
    built = REPO / "target" / profile / libname
    if not built.exists():
        sys.exit(f"{built} not found; run `cargo build -p npusim-py` first")
    stage = Path(tempfile.mkdtemp(prefix="npusim-py-"))
    suffix = ".pyd" if sys.platform.startswith("win") else ".so"
    shutil.copy2(built, stage / f"npusim_py{suffix}")
    sys.path.insert(0, str(stage))
    import npusim_py

    return npusim_py


def approx(a, b, rel=1e-6):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1.0)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--release", action="store_true")
    args = parser.parse_args()
    m = import_module("release" if args.release else "debug")

    checks = 0

    def ok(cond, what):
        nonlocal checks
        if not cond:
            sys.exit(f"FAIL: {what}")
        checks += 1
        print(f"ok: {what}")

    # Hardware config and derived bandwidth.
    cfg = m.NpuConfig()
    ok(cfg.sw == 128 and cfg.sh == 128, "default array is 128x128")
    ok(approx(cfg.bw_bytes_per_cycle, 511.428571, 1e-6), "bw is 358e9/700e6 bytes per cycle")
    ok(approx(cfg.cycles_to_us(700.0), 1.0), "700 cycles is 1 us at 700 MHz")

    custom = m.NpuConfig("sw = 64\nsh = 64\n")
    ok(custom.sw == 64, "config parses from TOML text")

    # Library and predictor.
    lib = m.ModelLibrary()
    names = lib.model_names()
    ok(len(names) == 8, f"eight built-in models ({names})")
    p = lib.predict("cnn-an", batch=1)
    ok(approx(p["cycles"], 1708910.0), "cnn-an batch-1 prediction")
    ok(p["predicted_unroll"] is None, "cnn prediction carries no unroll")
    p4 = lib.predict("cnn-an", batch=4)
    ok(p4["cycles"] > p["cycles"], "batch 4 takes longer than batch 1")
    r = lib.predict("rnn-mt1", batch=1, input_len=12)
    ok(r["predicted_unroll"] >= 1, "rnn prediction reports its unroll")
    try:
        lib.predict("cnn-an", input_len=5)
        sys.exit("FAIL: input_len on a cnn must raise")
    except ValueError:
        ok(True, "input_len on a cnn raises ValueError")

    # LUT worked example.
    ok(
        m.predict_unroll("# profile: t\n10,8\n10,12\n10,18\n", 10) == 12,
        "geomean of {8,12,18} predicts 12",
    )

    # Workload generation is seeded.
    w1 = m.generate_workload(42, 6, 7_000_000)
    w2 = m.generate_workload(42, 6, 7_000_000)
    ok(w1 == w2, "same seed generates identical workloads")

    # Simulation: determinism, metrics sanity, policy ordering.
    res_a = m.simulate(w1, policy="prema", mechanism="dynamic")
    res_b = m.simulate(w1, policy="prema", mechanism="dynamic")
    ok(res_a.trace_csv == res_b.trace_csv, "reruns are byte-identical")
    ok(res_a.antt >= 1.0, f"antt {res_a.antt:.3f} >= 1")
    ok(0.0 < res_a.fairness <= 1.0, f"fairness {res_a.fairness:.3f} in (0, 1]")
    for task_id, c_single, c_multi in res_a.per_task():
        ok(c_multi >= c_single * (1 - 1e-9), f"{task_id} never beats isolation")

    res_fcfs = m.simulate(w1, policy="fcfs", mechanism="checkpoint")
    ok(
        res_a.antt <= res_fcfs.antt + 1e-9,
        f"prema antt {res_a.antt:.3f} <= fcfs antt {res_fcfs.antt:.3f}",
    )

    rates = res_fcfs.sla_violation_rates()
    ok(rates["2"] >= rates["16"], "sla violations shrink as N grows")

    print(f"\nsmoke test passed ({checks} checks)")


if __name__ == "__main__":
    main()
