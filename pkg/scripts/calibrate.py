#!/usr/bin/env python3
"""Verify (or re-derive) the frozen calibration constants.

The acceptance suite reads src/fpplab/fixtures/calibration.json; this script
re-runs reduced-size versions of the underlying ensembles on an independent
seed and prints the series each constant was chosen from.  Run it after
changing samplers or thresholds; if a printed series stops decreasing, the
frozen constants need revisiting.
"""

import argparse
import collections

import numpy as np

from fpplab import certify, harness, lattice, weights, _rng
from fpplab.config import ExperimentConfig
from fpplab.selftest import load_calibration
from fpplab.weights import DistributionSpec

EXP1 = DistributionSpec.exponential(1.0)


def check_geodesic_stats(cal, trials=120, seed=20260808):
    cfg = ExperimentConfig(
        kind="geodesic-stats", dimension=2, radius=16, dist=EXP1,
        mode="exact", trials=trials, master_seed=seed, grid_log2=40,
        params={"k_list": cal["heavy_edge"]["k_list"], "heavy_m": cal["heavy_edge"]["m"]},
    )
    _, rows = harness.run_trials(cfg)
    by_k = collections.defaultdict(list)
    for r in rows:
        by_k[r["k"]].append(r)
    c = cal["heavy_edge"]["c"]
    c0 = cal["length_bound"]["c0"]
    print(f"heavy-edge event P(min_heavy/k < {c}) and length P(max_len/k > {c0}):")
    for k, rs in sorted(by_k.items()):
        mh = np.array([r["min_heavy_over_k"] for r in rs])
        ml = np.array([r["max_len_over_k"] for r in rs])
        print(f"  k={k:3d}  p_heavy={np.mean(mh < c):.3f}  p_len={np.mean(ml > c0):.3f}")


def check_black_scan(cal, trials=40, seed=20260808):
    bs = cal["black_scan"]
    params = certify.BlackParams(
        mode="black", delta=bs["delta"], m=bs["m"], size_reading=bs["size_reading"]
    )
    print(f"black-scan failure rate at delta={bs['delta']} m={bs['m']} budget={bs['budget']}:")
    for k in bs["k_list"]:
        box = lattice.build_box(2, 2 * k)
        fails = 0
        for i in range(trials):
            f = weights.sample_field(
                box, EXP1, mode="float", master_seed=_rng.spawn_seed(seed, k, i)
            )
            rep = certify.scan_event(
                f, k, params, mode="C", otherwise_rule=bs["otherwise_rule"],
                budget=bs["budget"], subsample_seed=i,
            )
            fails += not rep.passed
        print(f"  k={k:3d}  fail={fails}/{trials}")


def check_gray_count(cal, trials=30, seed=20260808):
    gc = cal["gray_count"]
    box = lattice.build_box(2, gc["radius"])
    tuning = certify.NBoxTuning(
        delta_speed=gc["delta_speed"],
        r_thresholds=certify.RThresholds.for_distribution(EXP1, gc["r"]),
        window_len=gc["window_len"],
        alpha2=gc["alpha2"],
    )
    half = gc["x_l1"] // 2
    src, tgt = (-half, 0), (gc["x_l1"] - half, 0)
    hits = 0
    for i in range(trials):
        f = weights.sample_field(
            box, EXP1, mode="float", master_seed=_rng.spawn_seed(seed, 7, i)
        )
        try:
            rep = certify.count_gray(f, src, tgt, gc["n"], tuning)
        except certify.NonUniqueGeodesicError:
            continue
        hits += rep.gray_count >= 1
    print(f"gray-count >= 1 in {hits}/{trials} trials (majority threshold {gc['majority_min']}%)")


def check_resample(cal, attempts=800, seed=20260808):
    rs = cal["resample"]
    cfg = ExperimentConfig(
        kind="resample-exp", dimension=2, radius=rs["radius"], dist=EXP1,
        mode="exact", trials=attempts, master_seed=seed, grid_log2=40,
        params={"m": rs["m"], "max_attempts": attempts},
    )
    summary, _ = harness.run_resample_experiment(cfg)
    print(
        f"resample: qualifying {summary['qualifying']}/{summary['attempts']} "
        f"(frozen rate {rs['observed_qualifying_rate']}), passed {summary['passed']}"
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20260808)
    ap.add_argument("--quick", action="store_true", help="smallest sizes")
    args = ap.parse_args()
    cal = load_calibration()
    scale = 0.4 if args.quick else 1.0
    check_geodesic_stats(cal, trials=int(120 * scale), seed=args.seed)
    check_black_scan(cal, trials=int(40 * scale), seed=args.seed)
    check_gray_count(cal, trials=int(30 * scale), seed=args.seed)
    check_resample(cal, attempts=int(800 * scale), seed=args.seed)


if __name__ == "__main__":
    main()
