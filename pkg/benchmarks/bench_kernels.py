#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

The backend is fixed at import time by PIXELAOA_BACKEND, so this script
re-executes itself once per backend and prints a comparison table.  It also
cross-checks that both backends produce the same numbers.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _build_problem():
    from pixelaoa import AngleGrid, GeometryConfig, PortLayout, SensingArea, generate_synthetic_dataset
    from pixelaoa.optimizer import ConfigEvaluator

    grid = AngleGrid()
    ds = generate_synthetic_dataset(PortLayout(), grid)       # 5x5: 65 ports
    ev = ConfigEvaluator(ds, 1.0)
    area = SensingArea(70, 110, -20, 20)                      # 41 x 41 points
    rng = np.random.default_rng(0)
    configs = []
    for _ in range(64):
        F = tuple(int(i) for i in rng.choice(ds.n_feed, size=8, replace=False))
        bits = tuple(int(b) for b in rng.integers(0, 2, size=ds.n_loaded))
        configs.append(GeometryConfig(F, bits))
    return ds, ev, area, configs


def _bench_fim(ev, area, configs, repeats):
    # first call includes JIT compilation; measure steady state
    ev.objective_many(configs[:4], area)
    best = np.inf
    checksum = 0.0
    for _ in range(repeats):
        fresh = type(ev)(ev.dataset, ev.snr, ev.feednet)
        t0 = time.perf_counter()
        objs = fresh.objective_many(configs, area)
        best = min(best, time.perf_counter() - t0)
        checksum = float(np.sum([o for o in objs if np.isfinite(o)]))
    return best, checksum


def _bench_ml(repeats):
    from pixelaoa import AngleGrid, SensingArea, upa_patterns
    from pixelaoa.simulate import ml_estimate, simulate_snapshot

    grid = AngleGrid(theta_start_deg=60, theta_stop_deg=120, phi_start_deg=-60,
                     phi_stop_deg=60, step_deg=0.5)
    pats = upa_patterns(4, 4, 0.5, grid)
    area = SensingArea(60, 120, -60, 60)                      # 121 x 241 candidates
    snap = simulate_snapshot(pats, (90.0, 0.0), (1.0, 0.0), 100.0, 0)
    ml_estimate(snap.y, pats, area)                           # warm-up + basis build
    best = np.inf
    est = (0.0, 0.0)
    for _ in range(repeats):
        t0 = time.perf_counter()
        for trial in range(50):
            s = simulate_snapshot(pats, (90.0, 0.0), (1.0, 0.0), 100.0, trial)
            est = ml_estimate(s.y, pats, area)
        best = min(best, time.perf_counter() - t0)
    return best / 50, est


def run_measurements(repeats):
    from pixelaoa import kernels

    ds, ev, area, configs = _build_problem()
    fim_t, fim_sum = _bench_fim(ev, area, configs, repeats)
    ml_t, est = _bench_ml(repeats)
    return {
        "backend": kernels.backend_name(),
        "fim_sweep_64cfg_s": fim_t,
        "fim_checksum": fim_sum,
        "ml_search_per_snapshot_s": ml_t,
        "ml_estimate": list(est),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--emit-json", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.emit_json:
        print(json.dumps(run_measurements(args.repeats)))
        return

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, PIXELAOA_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--repeats", str(args.repeats),
             "--emit-json"],
            env=env, capture_output=True, text=True, check=True)
        results[backend] = json.loads(out.stdout.strip().splitlines()[-1])

    nb, npy = results["numba"], results["numpy"]
    assert abs(nb["fim_checksum"] - npy["fim_checksum"]) <= 1e-9 * abs(npy["fim_checksum"]), \
        "backends disagree on the FIM sweep"
    assert nb["ml_estimate"] == npy["ml_estimate"], "backends disagree on the ML estimate"

    print(f"{'kernel':<34}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for key, label in (("fim_sweep_64cfg_s", "CRLB objective, 64 configs [s]"),
                       ("ml_search_per_snapshot_s", "ML search per snapshot [s]")):
        a, b = nb[key], npy[key]
        print(f"{label:<34}{a:>12.4f}{b:>12.4f}{b / a:>9.1f}x")
    print("checksums agree; backends interchangeable")


if __name__ == "__main__":
    main()
