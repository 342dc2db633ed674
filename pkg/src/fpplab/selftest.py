"""Oracle-equivalence suite over the shipped fixture corpus.

Each fixture pins a (distribution, seed, radius) triple; the suite samples the
field, brute-forces the listed pairs, and demands bit-exact agreement with the
fast modules on passage times, optimal-path sets, counts, extremal lengths,
minimal heavy-edge counts, and bad-vertex answers.
"""

from __future__ import annotations

import json
from importlib import resources

from . import fpt, geodesics, oracle, weights
from .lattice import build_box, l1_distance


def load_corpus() -> list[dict]:
    ref = resources.files("fpplab") / "fixtures" / "oracle_corpus.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def load_calibration() -> dict:
    ref = resources.files("fpplab") / "fixtures" / "calibration.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def check_fixture(fx: dict) -> list[str]:
    """Run every comparison for one fixture; returns mismatch descriptions."""
    issues: list[str] = []
    box = build_box(2, fx["radius"])
    dist = weights.DistributionSpec.from_json(fx["dist"])
    f = weights.sample_field(
        box, dist, mode="exact", master_seed=fx["seed"], grid_log2=fx["grid_log2"]
    )
    heavy_thr = f.heavy_threshold(fx["heavy_value"])
    cap_extra = fx.get("cap_extra", 8)

    dag_cache: dict = {}

    def dag_for(src):
        if src not in dag_cache:
            ptf = fpt.shortest_paths(f, src)
            dag_cache[src] = (ptf, fpt.build_geodesic_dag(ptf, f))
        return dag_cache[src]

    for a_l, b_l in fx["pairs"]:
        a, b = tuple(a_l), tuple(b_l)
        res = oracle.brute_force(f, a, b, length_cap=l1_distance(a, b) + cap_extra)
        if res.partial:
            issues.append(f"{a}->{b}: enumeration partial, raise the cap")
            continue
        ptf, dag = dag_for(a)
        tid = box.vertex_id(b)
        if int(ptf.t[tid]) != res.time:
            issues.append(f"{a}->{b}: time {int(ptf.t[tid])} != oracle {res.time}")
        count, sat = fpt.count_optimal_paths(dag, b)
        if sat or count != res.count:
            issues.append(f"{a}->{b}: count {count} != oracle {res.count}")
        lens = fpt.extremal_path_lengths(dag, b)
        if lens != (res.min_len, res.max_len):
            issues.append(f"{a}->{b}: lengths {lens} != oracle {(res.min_len, res.max_len)}")
        mh = fpt.min_heavy_edges(dag, b, heavy_thr)
        omh = res.min_heavy(f, heavy_thr)
        if mh != omh:
            issues.append(f"{a}->{b}: min-heavy {mh} != oracle {omh}")
        dag_paths = frozenset(
            tuple(box.coord(v) for v in p) for p in fpt._enumerate_ids(dag, tid)
        )
        if dag_paths != res.path_set():
            issues.append(f"{a}->{b}: path sets differ")

    probe = tuple(fx.get("probe", [0, 0]))
    ray_src = tuple(fx["ray_source"])
    _, dag_probe = dag_for(probe)
    _, dag_v = dag_for(ray_src)
    for ray in geodesics.boundary_rays(dag_v, box):
        rep = geodesics.bad_indices(ray, dag_probe)
        if rep.degenerate:
            continue
        expected = []
        for i in range(2, len(ray) + 1):
            x = ray.vertex(i)
            res = oracle.brute_force(
                f, probe, x, length_cap=l1_distance(probe, x) + cap_extra
            )
            if res.partial:
                issues.append(f"ray {ray.terminal} idx {i}: partial enumeration")
                continue
            if res.is_bad_vertex(ray.vertices):
                expected.append(i)
        if rep.bad_indices != tuple(expected):
            issues.append(
                f"ray {ray.terminal}: bad {rep.bad_indices} != oracle {tuple(expected)}"
            )
    return issues


def run_selftest(verbose: bool = False, corpus: list[dict] | None = None) -> bool:
    corpus = load_corpus() if corpus is None else corpus
    ok = True
    for fx in corpus:
        issues = check_fixture(fx)
        if issues:
            ok = False
        if verbose:
            status = "PASS" if not issues else "FAIL"
            print(f"{status} {fx['name']}")
            for msg in issues:
                print(f"    {msg}")
    return ok
