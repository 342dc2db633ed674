"""Acceptance criteria, one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s`.  Criteria are evaluated at
their stated tolerances; ensembles and thresholds come from the calibration
fixture shipped with the package.
"""

import collections
import json
import math
import time

import numpy as np
import pytest

from fpplab import certify, fpt, harness, lattice
from fpplab.cli import main as cli_main
from fpplab.config import ExperimentConfig
from fpplab.harness import estimate_decay, run_resample_experiment, run_trials
from fpplab.lattice import build_box, edge_between
from fpplab.selftest import load_calibration, run_selftest
from fpplab.weights import DistributionSpec, sample_field
from fpplab import _rng

EXP1 = DistributionSpec.exponential(1.0)
UNIF01 = DistributionSpec.uniform(0.0, 1.0)
WORKERS = 2


def verdict(num: int, ok: bool, detail: str):
    print(f"\nACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def calibration():
    return load_calibration()


def test_criterion_01_oracle_equivalence():
    t0 = time.time()
    ok = run_selftest(verbose=False)
    elapsed = time.time() - t0
    verdict(
        1,
        ok and elapsed < 30.0,
        f"50-fixture oracle equivalence suite ({'clean' if ok else 'mismatches'}, {elapsed:.1f}s < 30s)",
    )


def test_criterion_02_metric_and_subpath():
    from fpplab._speedkernel import triangle_holds

    t0 = time.time()
    jobs = [(2, i) for i in range(120)] + [(3, i) for i in range(80)]
    violations = []
    for dim, i in jobs:
        dist = UNIF01 if i % 2 == 0 else EXP1
        box = build_box(dim, 4)
        f = sample_field(
            box, dist, mode="exact",
            master_seed=_rng.spawn_seed(0xACC2, dim, i), grid_log2=16,
        )
        ap = fpt.all_pairs_times(f)
        if not np.all(np.diag(ap) == 0):
            violations.append((dim, i, "identity"))
        if not np.array_equal(ap, ap.T):
            violations.append((dim, i, "symmetry"))
        assert int(ap.max()) * 2 < 2**31
        if not triangle_holds(ap.astype(np.int32)):
            violations.append((dim, i, "triangle"))
        src = box.vertex_id((0,) * dim)
        if not np.array_equal(ap[src], fpt.shortest_paths_multi(f, [src])[0]):
            violations.append((dim, i, "dijkstra-crosscheck"))
        # sub-path optimality of extracted optimal paths
        dag = fpt.build_geodesic_dag(fpt.shortest_paths(f, (0,) * dim), f)
        for wid in box.boundary_vertex_ids()[:: max(1, dim * 7)]:
            path = fpt.extract_path(dag, box.coord(int(wid)))
            ids = [box.vertex_id(v) for v in path]
            w = [int(f.weight_of(edge_between(a, b))) for a, b in zip(path, path[1:])]
            cum = np.concatenate([[0], np.cumsum(w)])
            sub = ap[np.ix_(ids, ids)]
            want = np.abs(cum[None, :] - cum[:, None])
            if not np.array_equal(sub, want):
                violations.append((dim, i, "subpath"))
                break
    elapsed = time.time() - t0
    verdict(
        2,
        not violations and elapsed < 120.0,
        f"metric axioms + sub-path optimality on 200 fields, {len(violations)} violations ({elapsed:.1f}s < 120s)",
    )


def test_criterion_03_uniqueness_under_continuous_f():
    cfg = ExperimentConfig(
        kind="uniqueness", dimension=2, radius=20, dist=UNIF01,
        mode="exact", trials=1000, master_seed=0xACC3, grid_log2=40,
        workers=WORKERS, params={},
    )
    summary, rows = run_trials(cfg)
    tied_seeds = [r["seed"] for r in rows if r["tied_vertices"] > 0]
    if tied_seeds:
        print(f"  tie report: excluded seeds {tied_seeds}")
    verdict(
        3,
        len(tied_seeds) <= 2,
        f"discretised-uniform uniqueness: {len(tied_seeds)}/1000 fields with tied predecessors (<= 2 allowed)",
    )


def test_criterion_04_resampling_coupling(calibration):
    rs = calibration["resample"]
    t0 = time.time()
    cfg = ExperimentConfig(
        kind="resample-exp", dimension=2, radius=rs["radius"], dist=EXP1,
        mode="exact", trials=rs["max_attempts"], master_seed=0xACC4, grid_log2=40,
        params={"m": rs["m"], "max_attempts": rs["max_attempts"]},
    )
    summary, instances = run_resample_experiment(
        cfg, qualifying_target=rs["qualifying_target"]
    )
    elapsed = time.time() - t0
    for c in summary["counterexamples"]:
        print("  counterexample:", c)
    ok = (
        summary["qualifying"] >= rs["qualifying_target"]
        and summary["passed"] == summary["qualifying"]
        and elapsed < 300.0
    )
    verdict(
        4,
        ok,
        f"resampling coupling: {summary['passed']}/{summary['qualifying']} qualifying instances "
        f"pass (i)-(iii) over {summary['attempts']} attempts ({elapsed:.1f}s < 300s)",
    )


@pytest.fixture(scope="module")
def geodesic_stats_ensemble(calibration):
    he = calibration["heavy_edge"]
    t0 = time.time()
    cfg = ExperimentConfig(
        kind="geodesic-stats", dimension=2, radius=16, dist=EXP1,
        mode="exact", trials=he["trials"], master_seed=0xACC5, grid_log2=40,
        workers=WORKERS, params={"k_list": he["k_list"], "heavy_m": he["m"]},
    )
    _, rows = run_trials(cfg)
    by_k = collections.defaultdict(list)
    for r in rows:
        by_k[r["k"]].append(r)
    return by_k, time.time() - t0


def test_criterion_05_heavy_edge_density(calibration, geodesic_stats_ensemble):
    he = calibration["heavy_edge"]
    by_k, elapsed = geodesic_stats_ensemble
    series, trials = [], []
    for k in he["k_list"]:
        vals = [r["min_heavy_over_k"] for r in by_k[k]]
        series.append((k, float(np.mean([v < he["c"] for v in vals]))))
        trials.append(len(vals))
    print(f"  P(min_heavy/k < {he['c']}): {[(k, round(p, 4)) for k, p in series]}")
    decreasing = all(series[i + 1][1] <= series[i][1] for i in range(len(series) - 1))
    fit = estimate_decay(series, abscissa=he["abscissa"], trials=trials)
    print(f"  fitted rate {fit.rate:.5f}, 95% CI ({fit.ci_low:.5f}, {fit.ci_high:.5f})")
    verdict(
        5,
        decreasing and fit.positive and fit.ci_excludes_zero and elapsed < 600.0,
        f"heavy-edge density decay at M={he['m']}, c={he['c']}: "
        f"decreasing={decreasing}, rate={fit.rate:.5f}, CI excludes 0: {fit.ci_excludes_zero} "
        f"({elapsed:.0f}s < 600s)",
    )


def test_criterion_06_geodesic_length_bound(calibration, geodesic_stats_ensemble):
    lb = calibration["length_bound"]
    by_k, _ = geodesic_stats_ensemble
    series, trials = [], []
    for k in lb["k_list"]:
        vals = [r["max_len_over_k"] for r in by_k[k]]
        series.append((k, float(np.mean([v > lb["c0"] for v in vals]))))
        trials.append(len(vals))
    print(f"  P(max_len/k > {lb['c0']}): {[(k, round(p, 4)) for k, p in series]}")
    decreasing = all(series[i + 1][1] <= series[i][1] for i in range(len(series) - 1))
    fit = estimate_decay(series, abscissa=lb["abscissa"], trials=trials)
    verdict(
        6,
        decreasing and fit.positive,
        f"length-bound decay at C0={lb['c0']}: decreasing={decreasing}, rate={fit.rate:.4f}",
    )


def test_criterion_07_speed_bound(calibration):
    sb = calibration["speed_bound"]
    t0 = time.time()
    counts = harness.speed_bound_series(
        2, EXP1, sb["delta"], sb["k_list"], sb["trials_per_k"], 0xACC7, workers=WORKERS
    )
    elapsed = time.time() - t0
    series = [(k, h / n) for k, h, n in counts]
    trials = [n for _, _, n in counts]
    rep = []
    for (k, p), n in zip(series, trials):
        rep.append(p if p > 0 else harness.wilson_interval(0, n)[1])
    print(f"  raw counts: {counts}")
    print(f"  series (zeros Wilson-replaced): {[round(p, 9) for p in rep]}")
    decreasing = all(rep[i + 1] <= rep[i] for i in range(len(rep) - 1))
    fit = estimate_decay(series, abscissa=sb["abscissa"], trials=trials)
    verdict(
        7,
        decreasing and fit.positive,
        f"speed bound at delta={sb['delta']}: decreasing={decreasing}, "
        f"rate={fit.rate:.4f}, zero-replaced={list(fit.zero_replaced)} ({elapsed:.0f}s)",
    )


def test_criterion_08_black_scan_decay(calibration):
    bs = calibration["black_scan"]
    t0 = time.time()
    cfg = ExperimentConfig(
        kind="black-scan", dimension=2, radius=2 * max(bs["k_list"]), dist=EXP1,
        mode="float", trials=bs["trials"], master_seed=0xACC8,
        workers=WORKERS,
        params={
            "k_list": bs["k_list"], "delta": bs["delta"], "m": bs["m"],
            "budget": bs["budget"], "otherwise_rule": bs["otherwise_rule"],
            "size_reading": bs["size_reading"],
        },
    )
    summary, rows = run_trials(cfg)
    elapsed = time.time() - t0
    series, trials = [], []
    for k in bs["k_list"]:
        vals = [r["failed"] for r in rows if r["k"] == k]
        series.append((k, float(np.mean(vals))))
        trials.append(len(vals))
    print(f"  scan failure probabilities: {[(k, round(p, 4)) for k, p in series]}")
    non_increasing = all(series[i + 1][1] <= series[i][1] for i in range(len(series) - 1))
    fit = estimate_decay(series, abscissa=bs["abscissa"], trials=trials)
    print(f"  fitted rate vs sqrt(k): {fit.rate:.4f} (reported)")
    verdict(
        8,
        non_increasing,
        f"black-scan failure non-increasing over k={bs['k_list']}: {non_increasing}, "
        f"rate={fit.rate:.4f} ({elapsed:.0f}s)",
    )


def test_criterion_09_certificate_consistency(calibration):
    violations = []

    # scan with full budget = conjunction of certify_pair over all pairs
    params = certify.BlackParams(mode="black", delta=0.1, m=0.05)
    for seed in (1, 2, 3):
        box = build_box(2, 4)
        f = sample_field(box, UNIF01, mode="exact", master_seed=seed)
        rep = certify.scan_event(f, 2, params, mode="C", otherwise_rule="half-k")
        coords = [(x, y) for x in range(-2, 3) for y in range(-2, 3)]
        recomputed = []
        for a in coords:
            dag = fpt.build_geodesic_dag(fpt.shortest_paths(f, a), f)
            for b in coords:
                if lattice.l1_distance(a, b) >= math.sqrt(2):
                    r = certify.certify_pair(f, a, b, params, enforce_margin=False, _dag=dag)
                    if not r.holds:
                        recomputed.append((a, b, r.first_failing))
                elif len(fpt.extract_path(dag, b)) - 1 > 1.0:
                    recomputed.append((a, b, "otherwise-size"))
        if sorted((v.a, v.b, v.clause) for v in rep.violations) != sorted(recomputed):
            violations.append(("scan-conjunction", seed))

    # gray => black and white on every classified n-box
    gc = calibration["gray_count"]
    tuning = certify.NBoxTuning(
        delta_speed=gc["delta_speed"],
        r_thresholds=certify.RThresholds.for_distribution(EXP1, gc["r"]),
        window_len=gc["window_len"],
        alpha2=gc["alpha2"],
    )
    for seed in (11, 12):
        box = build_box(2, 16)
        f = sample_field(box, EXP1, mode="float", master_seed=seed)
        dag = fpt.build_geodesic_dag(fpt.shortest_paths(f, (0, 0)), f)
        path = fpt.extract_path(dag, (8, 0))
        for nb in certify.boxes_meeting_path(path, 2, 2, box.radius):
            col = certify.nbox_classify(f, nb, (8, 0), tuning, _dag=dag, _path=path)
            if col.gray and not (col.black and col.white):
                violations.append(("gray-implication", seed, nb))

    # black3 verdict equals black (path-length reading) on unique geodesics
    for seed in range(8):
        box = build_box(2, 8)
        f = sample_field(box, UNIF01, mode="exact", master_seed=100 + seed)
        for b in ((2, 1), (-1, 2), (0, -3)):
            p1 = certify.BlackParams(mode="black", delta=0.2, m=0.05, size_reading="path-length")
            p3 = certify.BlackParams(mode="black3", delta=0.2, m=0.05)
            if certify.certify_pair(f, (0, 0), b, p1).holds != certify.certify_pair(f, (0, 0), b, p3).holds:
                violations.append(("black3-vs-black", seed, b))

    verdict(9, not violations, f"certificate consistency: {len(violations)} violations")


def _run_cli_bytes(args, tmp_path, name):
    out = tmp_path / name
    rc = cli_main(list(args) + ["--out", str(out)])
    assert rc == 0
    return out.read_bytes()


def test_criterion_10_cli_determinism(tmp_path):
    t0 = time.time()
    commands = {
        "sample": ["sample", "--radius", "3", "--dist", "uniform:0,1", "--mode", "exact", "--seed", "4"],
        "fpt": ["fpt", "--radius", "3", "--dist", "exponential:1", "--mode", "float", "--seed", "4"],
        "rays": ["rays", "--radius", "3", "--dist", "uniform:0,1", "--mode", "exact", "--seed", "4"],
        "badpoints": ["badpoints", "--radius", "3", "--dist", "uniform:0,1", "--mode", "exact", "--seed", "4"],
        "certify": ["certify", "--radius", "4", "--dist", "uniform:0,1", "--mode", "exact",
                     "--seed", "4", "--k-list", "2", "--delta", "0.05", "--m", "0.05"],
        "nbox": ["nbox", "--radius", "6", "--dist", "exponential:1", "--mode", "float",
                  "--seed", "4", "--n", "2", "--target", "4", "0", "--alpha2", "0.4"],
        "resample-exp": ["resample-exp", "--radius", "6", "--dist", "exponential:1",
                          "--mode", "exact", "--seed", "4", "--trials", "25", "--m", "0.5"],
    }
    mismatched = []
    for name, args in commands.items():
        if _run_cli_bytes(args, tmp_path, f"{name}-1") != _run_cli_bytes(args, tmp_path, f"{name}-2"):
            mismatched.append(name)

    series = tmp_path / "series.csv"
    series.write_text("k,p\n1,0.5\n2,0.25\n3,0.125\n")
    d1 = _run_cli_bytes(["decay", "--series", str(series), "--abscissa", "linear"], tmp_path, "d1")
    d2 = _run_cli_bytes(["decay", "--series", str(series), "--abscissa", "linear"], tmp_path, "d2")
    if d1 != d2:
        mismatched.append("decay")

    cfg = {
        "kind": "geodesic-stats", "dimension": 2, "radius": 8,
        "dist": {"kind": "exponential", "params": [1.0]}, "mode": "exact",
        "trials": 6, "master_seed": 3, "grid_log2": 40,
        "params": {"k_list": [4], "heavy_m": 1.0},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    outs = []
    for label, workers in (("w1", "1"), ("w1b", "1"), ("w8", "8")):
        od = tmp_path / f"run-{label}"
        assert cli_main(["run", "--config", str(cfg_path), "--workers", workers, "--out", str(od)]) == 0
        outs.append((od / "trials.csv").read_bytes() + (od / "summary.json").read_bytes())
    if not (outs[0] == outs[1] == outs[2]):
        mismatched.append("run-workers")

    elapsed = time.time() - t0
    verdict(
        10,
        not mismatched and elapsed < 60.0,
        f"CLI determinism across reruns and worker counts 1/8: "
        f"mismatches={mismatched} ({elapsed:.1f}s < 60s)",
    )
