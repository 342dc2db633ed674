"""Seeded experiment orchestration and statistics.

``run_trials`` executes one experiment kind over seeded trials: trial i uses
the seed derived from (master_seed, i), results are folded in trial order, and
the emitted CSV/JSON bytes are identical for any worker count.  Everything is
a pure function of the config, so reruns replay exactly.

The resampling experiment replays one edge of a heavy ray with a lowered
weight and checks the three finitely-verifiable consequences of the coupling:
the passage time to later ray vertices strictly drops, every new optimal path
uses the replaced edge, and the ray segment past the edge stays optimal.
These are theorems given the filters, so any failure localises a bug; the
report carries offending (seed, edge) pairs verbatim.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from . import _rng, _speedkernel, certify, fpt, geodesics, weights
from .config import ExperimentConfig
from .lattice import Coord, build_box, edge_between
from .weights import DistributionSpec, WeightField


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential-decay fit of log p against an abscissa."""

    rate: float
    ci_low: float
    ci_high: float
    intercept: float
    r_squared: float
    abscissa: str
    zero_replaced: tuple[int, ...]

    @property
    def positive(self) -> bool:
        return self.rate > 0

    @property
    def ci_excludes_zero(self) -> bool:
        return self.ci_low > 0


# two-sided 97.5% Student-t quantiles for tiny dof (dof 1..10)
_T975 = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228]


def estimate_decay(
    series: list[tuple[float, float]],
    abscissa: str = "sqrt",
    trials: list[int] | None = None,
) -> DecayFit:
    """Fit p_k ~ exp(-rate * x_k) with x = sqrt(k) or k.

    Zero probabilities are replaced by their Wilson upper bound, which needs
    the trial count; replaced indices are flagged in the result.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 scales")
    if abscissa not in ("sqrt", "linear"):
        raise ValueError(f"unknown abscissa {abscissa!r}")
    xs, ps, replaced = [], [], []
    for i, (k, p) in enumerate(series):
        if p < 0 or p > 1:
            raise ValueError(f"probability out of range at scale {k}: {p}")
        if p == 0.0:
            if trials is None:
                raise ValueError("zero probability needs trial counts for Wilson bound")
            p = wilson_interval(0, trials[i])[1]
            replaced.append(i)
        xs.append(math.sqrt(k) if abscissa == "sqrt" else float(k))
        ps.append(p)
    y = np.log(ps)
    x = np.asarray(xs)
    n = len(x)
    if np.allclose(y, y[0]):
        return DecayFit(0.0, 0.0, 0.0, float(y[0]), 1.0, abscissa, tuple(replaced))
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise ValueError("degenerate series: all scales equal")
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    dof = n - 2
    if dof > 0:
        s2 = float((resid**2).sum()) / dof
        se = math.sqrt(s2 / sxx)
        tq = _T975[min(dof, 10) - 1]
        ci = (-slope - tq * se, -slope + tq * se)
    else:
        ci = (-math.inf, math.inf)
    sst = float(((y - ym) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / sst if sst > 0 else 1.0
    return DecayFit(
        rate=-slope,
        ci_low=ci[0],
        ci_high=ci[1],
        intercept=float(intercept),
        r_squared=r2,
        abscissa=abscissa,
        zero_replaced=tuple(replaced),
    )


# -- per-kind trial bodies ------------------------------------------------------


def _origin(dim: int) -> Coord:
    return (0,) * dim


def _sample_for(config: ExperimentConfig, seed: int, radius: int | None = None) -> WeightField:
    box = build_box(config.dimension, config.radius if radius is None else radius)
    return weights.sample_field(
        box, config.dist, mode=config.mode, master_seed=seed, grid_log2=config.grid_log2
    )


def _trial_passage_time_mean(config: ExperimentConfig, trial: int, seed: int):
    k = int(config.params["k"])
    f = _sample_for(config, seed)
    target = (k,) + (0,) * (config.dimension - 1)
    ptf = fpt.shortest_paths(f, _origin(config.dimension))
    t = ptf.t_of(target)
    t_val = float(t) / (1 << f.grid_log2) if f.is_exact else float(t)
    return [{"trial": trial, "seed": seed, "k": k, "t": t_val, "t_over_k": t_val / k}]


def _trial_geodesic_stats(config: ExperimentConfig, trial: int, seed: int):
    k_list = [int(k) for k in config.params["k_list"]]
    heavy_m = float(config.params["heavy_m"])
    rows = []
    origin = _origin(config.dimension)
    for k in k_list:
        f = _sample_for(config, _rng.spawn_seed(seed, k), radius=2 * k)
        target = (k,) + (0,) * (config.dimension - 1)
        ptf = fpt.shortest_paths(f, origin)
        dag = fpt.build_geodesic_dag(ptf, f)
        stats = fpt.path_stats(dag, f, target, f.heavy_threshold(heavy_m))
        t = ptf.t_of(target)
        t_val = float(t) / (1 << f.grid_log2) if f.is_exact else float(t)
        rows.append(
            {
                "trial": trial,
                "seed": seed,
                "k": k,
                "t": t_val,
                "min_len": stats.min_len,
                "max_len": stats.max_len,
                "min_heavy": stats.min_heavy,
                "max_len_over_k": stats.max_len / k,
                "min_heavy_over_k": stats.min_heavy / k,
            }
        )
    return rows


_INC_LISTS: dict[tuple[int, int], tuple[list, list, list]] = {}


def _incidence_lists(box) -> tuple[list, list, list]:
    key = (box.dimension, box.radius)
    if key not in _INC_LISTS:
        _INC_LISTS[key] = tuple(arr.tolist() for arr in box.incidence)
    return _INC_LISTS[key]


def lazy_time_below_cap(
    box, dist: DistributionSpec, master_seed: int, a: Coord, b: Coord, cap: float
) -> bool:
    """Is t(a, b) < cap?  Bidirectional cap-pruned Dijkstra, lazy weights.

    Draws exactly the values ``sample_field(box, dist, 'float', master_seed)``
    would assign, but only for edges the two sub-cap clusters touch; growing
    half-radius balls from both ends keeps very rare low-time events
    affordable at millions of trials.
    """
    indptr_l, nbr_l, eid_l = _incidence_lists(box)
    sid, tid = box.vertex_id(a), box.vertex_id(b)
    if sid == tid:
        return 0.0 < cap
    quantile = dist.scalar_quantile()
    u01 = _rng.uniform01_py
    inf = math.inf
    wcache: dict[int, float] = {}
    dists: tuple[dict, dict] = ({sid: 0.0}, {tid: 0.0})
    heaps = ([(0.0, sid)], [(0.0, tid)])
    best = inf
    while heaps[0] and heaps[1]:
        if heaps[0][0][0] + heaps[1][0][0] >= cap or best < cap:
            break
        side = 0 if heaps[0][0][0] <= heaps[1][0][0] else 1
        heap = heaps[side]
        d, u = heapq.heappop(heap)
        mine, other = dists[side], dists[1 - side]
        if d > mine[u]:
            continue
        for kk in range(indptr_l[u], indptr_l[u + 1]):
            e = eid_l[kk]
            w = wcache.get(e)
            if w is None:
                w = quantile(u01(master_seed, e, 0, 0))
                wcache[e] = w
            nd = d + w
            if nd < cap:
                v = nbr_l[kk]
                if nd < mine.get(v, inf):
                    mine[v] = nd
                    heapq.heappush(heap, (nd, v))
                ov = other.get(v)
                if ov is not None and nd + ov < best:
                    best = nd + ov
    return best < cap


def _trial_speed_bound(config: ExperimentConfig, trial: int, seed: int):
    """One indicator per scale: is t(a, b) < delta * |a-b|_1?

    Endpoints sit at (+-k/2, 0, ...) of a radius-k box; the cap-pruned lazy
    search touches only the low-cost cluster, so large trial counts stay
    cheap.  trials_per_k lets the far scales run fewer trials than the near
    ones (rows carry an "active" flag).
    """
    delta = float(config.params["delta"])
    k_list = [int(k) for k in config.params["k_list"]]
    per_k = config.params.get("trials_per_k")
    rows = []
    for i, k in enumerate(k_list):
        if per_k is not None and trial >= int(per_k[i]):
            continue
        box = build_box(config.dimension, k)
        half = k // 2
        a = (-half,) + (0,) * (config.dimension - 1)
        b = (k - half,) + (0,) * (config.dimension - 1)
        trial_seed = _rng.spawn_seed(seed, k)
        if _speedkernel.HAVE_NUMBA and config.dist.kind == "exponential":
            hit = _speedkernel.exp_time_below_cap(
                box, config.dist.params[0], trial_seed, a, b, delta * k
            )
        else:
            hit = lazy_time_below_cap(box, config.dist, trial_seed, a, b, delta * k)
        rows.append({"trial": trial, "seed": seed, "k": k, "below": int(hit)})
    return rows


def _trial_black_scan(config: ExperimentConfig, trial: int, seed: int):
    p = config.params
    k_list = [int(k) for k in p["k_list"]]
    params = certify.BlackParams(
        mode="black",
        delta=float(p["delta"]),
        m=float(p["m"]),
        size_reading=p.get("size_reading", "path-length"),
    )
    rows = []
    for k in k_list:
        f = _sample_for(config, _rng.spawn_seed(seed, k), radius=2 * k)
        rep = certify.scan_event(
            f,
            k,
            params,
            mode="C",
            otherwise_rule=p.get("otherwise_rule", "half-k"),
            budget=int(p["budget"]) if p.get("budget") else None,
            subsample_seed=_rng.spawn_seed(seed, k, 1),
        )
        rows.append(
            {
                "trial": trial,
                "seed": seed,
                "k": k,
                "pairs_checked": rep.pairs_checked,
                "violations": len(rep.violations),
                "failed": int(not rep.passed),
            }
        )
    return rows


def _trial_uniqueness(config: ExperimentConfig, trial: int, seed: int):
    f = _sample_for(config, seed)
    ptf = fpt.shortest_paths(f, _origin(config.dimension))
    dag = fpt.build_geodesic_dag(ptf, f)
    tied = int((dag.pred_count() >= 2).sum())
    return [{"trial": trial, "seed": seed, "tied_vertices": tied}]


# -- resampling experiment ----------------------------------------------------


@dataclass(frozen=True)
class ResampleInstance:
    seed: int
    probe_vertex: Coord
    edge: tuple[Coord, Coord]
    edge_index: int
    ray_terminal: Coord
    checked_indices: int
    passed: bool
    vacuous: bool
    failures: tuple[str, ...]


def _choose_probe_vertex(f: WeightField, t0: np.ndarray, m_storage) -> Coord:
    """Deterministic rule: farthest vertex (l1) with t(0, v) <= M."""
    box = f.box
    ok = np.nonzero(t0 <= m_storage)[0]
    coords = [box.coord(int(i)) for i in ok]
    return max(coords, key=lambda c: (sum(abs(x) for x in c), tuple(-x for x in c)))


def _dag_reach_without_edge(dag: fpt.GeodesicDag, banned_edge_id: int) -> np.ndarray:
    indptr, succ, eids = dag.successors_csr()
    n = dag.box.n_vertices
    reached = np.zeros(n, dtype=bool)
    sid = dag.source_id
    reached[sid] = True
    stack = [sid]
    while stack:
        u = stack.pop()
        for kk in range(indptr[u], indptr[u + 1]):
            if int(eids[kk]) == banned_edge_id:
                continue
            v = int(succ[kk])
            if not reached[v]:
                reached[v] = True
                stack.append(v)
    return reached


def _walk_ray_ids(dag: fpt.GeodesicDag, wid: int):
    """Vertex/edge id chains of the lexmin ray source -> w (acyclic mode)."""
    box = dag.box
    indptr, preds, eids = dag.pred_indptr, dag.pred_vertex, dag.pred_edge
    sid = dag.source_id
    verts = [wid]
    edges = []
    v = wid
    while v != sid:
        lo, hi = indptr[v], indptr[v + 1]
        k = lo
        if hi - lo > 1:
            k = min(range(lo, hi), key=lambda i: box.coord(int(preds[i])))
        edges.append(int(eids[k]))
        v = int(preds[k])
        verts.append(v)
    verts.reverse()
    edges.reverse()
    return verts, edges


def resample_one_instance(
    config: ExperimentConfig, seed: int, accept: tuple | None = None
) -> ResampleInstance | None:
    """Run the coupling checks on one field, or None if it does not qualify.

    Qualification: some boundary ray from the probe vertex v (which satisfies
    t(0, v) <= M) carries an edge of weight >= 3M with ray vertices after it.
    Rays are scanned in boundary-vertex order, heavy edges within a ray in
    ascending position, and the first hit is the instance's edge.
    """
    m = float(config.params["m"])
    origin = _origin(config.dimension)
    f = _sample_for(config, seed)
    heavy_thr = f.heavy_threshold(3.0 * m)
    m_storage = f.heavy_threshold(m)

    ptf0 = fpt.shortest_paths(f, origin)
    v = _choose_probe_vertex(f, ptf0.t, m_storage)
    ptf_v = fpt.shortest_paths(f, v)
    dag_v = fpt.build_geodesic_dag(ptf_v, f)

    box = f.box
    values = f.values
    chosen = None
    if not dag_v.two_way_ties:
        for wid in box.boundary_vertex_ids():
            verts, edges = _walk_ray_ids(dag_v, int(wid))
            for pos in range(len(edges) - 1):  # skip the final edge: need l > j
                if values[edges[pos]] >= heavy_thr:
                    ray = geodesics.Ray(v, tuple(box.coord(u) for u in verts))
                    chosen = (ray, pos + 2, box.edge(edges[pos]))
                    break
            if chosen:
                break
    else:
        for ray in geodesics.boundary_rays(dag_v, box):
            for j in range(2, len(ray)):
                e = edge_between(ray.vertex(j - 1), ray.vertex(j))
                if f.weight_of(e) >= heavy_thr:
                    chosen = (ray, j, e)
                    break
            if chosen:
                break
    if chosen is None:
        return None
    ray, j, eta = chosen

    if accept is None:
        accept = ("<", m)
    spec = weights.ResampleSpec(
        frozenset([eta]), resample_seed=_rng.spawn_seed(seed, 0xE5A), accept=accept
    )
    f2 = weights.resample(f, spec)
    eta_id = f.box.edge_id(eta)
    if f2.values[eta_id] == f.values[eta_id]:
        # acceptance pinned the old value: the implications are vacuous
        return ResampleInstance(
            seed, v, (eta.a, eta.b), eta_id, ray.terminal, 0, True, True, ()
        )

    ptf0p = fpt.shortest_paths(f2, origin)
    dag0p = fpt.build_geodesic_dag(ptf0p, f2)
    reach_wo = _dag_reach_without_edge(dag0p, eta_id)
    ptf_jp = fpt.shortest_paths(f2, ray.vertex(j))

    failures = []
    checked = 0
    seg_weight = 0
    for l in range(j + 1, len(ray) + 1):
        checked += 1
        x = ray.vertex(l)
        xid = f.box.vertex_id(x)
        seg_weight += f2.weight_of(edge_between(ray.vertex(l - 1), ray.vertex(l)))
        if not ptf0p.t[xid] < ptf0.t[xid]:
            failures.append(f"(i) t unchanged at index {l}")
        if reach_wo[xid]:
            failures.append(f"(ii) optimal path avoiding edge at index {l}")
        if ptf_jp.t[xid] != seg_weight:
            failures.append(f"(iii) ray segment not optimal at index {l}")
    return ResampleInstance(
        seed,
        v,
        (eta.a, eta.b),
        eta_id,
        ray.terminal,
        checked,
        not failures,
        False,
        tuple(failures),
    )


def _trial_resample_exp(config: ExperimentConfig, trial: int, seed: int):
    inst = resample_one_instance(config, seed)
    if inst is None:
        return [{"trial": trial, "seed": seed, "qualifying": 0, "passed": "", "failures": ""}]
    return [
        {
            "trial": trial,
            "seed": seed,
            "qualifying": 1,
            "passed": int(inst.passed),
            "failures": "; ".join(inst.failures),
        }
    ]


def _speed_chunk(args) -> int:
    dim, dist_json, master_seed, k, delta, lo, hi = args
    dist = DistributionSpec.from_json(dist_json)
    box = build_box(dim, k)
    half = k // 2
    a = (-half,) + (0,) * (dim - 1)
    b = (k - half,) + (0,) * (dim - 1)
    cap = delta * k
    use_kernel = _speedkernel.HAVE_NUMBA and dist.kind == "exponential"
    hits = 0
    for trial in range(lo, hi):
        seed = _rng.spawn_seed(_rng.spawn_seed(master_seed, trial), k)
        if use_kernel:
            hits += _speedkernel.exp_time_below_cap(box, dist.params[0], seed, a, b, cap)
        else:
            hits += lazy_time_below_cap(box, dist, seed, a, b, cap)
    return hits


def speed_bound_series(
    dimension: int,
    dist: DistributionSpec,
    delta: float,
    k_list: list[int],
    trials_per_k: list[int],
    master_seed: int,
    workers: int = 1,
) -> list[tuple[int, int, int]]:
    """(k, hits, trials) for the event t(a, b) < delta*k at each scale.

    Counts only, no per-trial rows: the deep-tail scales need millions of
    trials.  Seeds match the row-based speed-bound experiment, so spot checks
    against run_trials replay identically.
    """
    out = []
    for k, n in zip(k_list, trials_per_k):
        chunk = 50_000
        jobs = [
            (dimension, dist.to_json(), master_seed, int(k), float(delta), lo, min(lo + chunk, n))
            for lo in range(0, n, chunk)
        ]
        if workers > 1 and len(jobs) > 1:
            ctx = get_context("fork")
            with ctx.Pool(processes=workers) as pool:
                hits = sum(pool.map(_speed_chunk, jobs))
        else:
            hits = sum(_speed_chunk(j) for j in jobs)
        out.append((int(k), int(hits), int(n)))
    return out


_TRIAL_BODIES = {
    "passage-time-mean": _trial_passage_time_mean,
    "geodesic-stats": _trial_geodesic_stats,
    "speed-bound": _trial_speed_bound,
    "black-scan": _trial_black_scan,
    "resample-exp": _trial_resample_exp,
    "uniqueness": _trial_uniqueness,
}

_WORKER_CONFIG: ExperimentConfig | None = None


def _worker_init(config_json: dict):
    global _WORKER_CONFIG
    _WORKER_CONFIG = ExperimentConfig.from_json(config_json)


def _worker_run(trial: int):
    config = _WORKER_CONFIG
    seed = _rng.spawn_seed(config.master_seed, trial)
    return _TRIAL_BODIES[config.kind](config, trial, seed)


def run_trials(config: ExperimentConfig) -> tuple[dict, list[dict]]:
    """Execute all trials; returns (summary, rows).

    Rows arrive ordered by trial index regardless of worker count, and the
    summary is a deterministic fold over them.
    """
    trials = list(range(config.trials))
    if config.workers > 1 and config.trials > 1:
        ctx = get_context("fork")
        with ctx.Pool(
            processes=config.workers,
            initializer=_worker_init,
            initargs=(config.to_json(),),
        ) as pool:
            per_trial = pool.map(_worker_run, trials)
    else:
        _worker_init(config.to_json())
        per_trial = [_worker_run(i) for i in trials]
    rows = [row for batch in per_trial for row in batch]
    return summarize(config, rows), rows


def summarize(config: ExperimentConfig, rows: list[dict]) -> dict:
    summary: dict = {
        "kind": config.kind,
        "trials": config.trials,
        "rows": len(rows),
        "master_seed": config.master_seed,
    }
    if not rows:
        return summary
    kind = config.kind
    if kind == "passage-time-mean":
        vals = [r["t_over_k"] for r in rows]
        summary["mean_t_over_k"] = float(np.mean(vals))
        summary["std_t_over_k"] = float(np.std(vals))
    elif kind == "geodesic-stats":
        by_k: dict[int, list[dict]] = {}
        for r in rows:
            by_k.setdefault(r["k"], []).append(r)
        summary["per_k"] = {
            str(k): {
                "mean_t": float(np.mean([r["t"] for r in rs])),
                "mean_max_len_over_k": float(np.mean([r["max_len_over_k"] for r in rs])),
                "mean_min_heavy_over_k": float(np.mean([r["min_heavy_over_k"] for r in rs])),
            }
            for k, rs in sorted(by_k.items())
        }
    elif kind in ("speed-bound", "black-scan"):
        key = "below" if kind == "speed-bound" else "failed"
        by_k = {}
        for r in rows:
            by_k.setdefault(r["k"], []).append(r[key])
        per_k = {}
        for k, vals in sorted(by_k.items()):
            hits = int(sum(vals))
            lo, hi = wilson_interval(hits, len(vals))
            per_k[str(k)] = {
                "n": len(vals),
                "hits": hits,
                "p": hits / len(vals),
                "wilson_low": lo,
                "wilson_high": hi,
            }
        summary["per_k"] = per_k
    elif kind == "resample-exp":
        qualifying = [r for r in rows if r["qualifying"]]
        summary["qualifying"] = len(qualifying)
        summary["passed"] = int(sum(r["passed"] for r in qualifying if r["passed"] != ""))
        summary["failures"] = [
            {"seed": r["seed"], "failures": r["failures"]}
            for r in qualifying
            if r["passed"] == 0
        ]
    elif kind == "uniqueness":
        tied = [r["tied_vertices"] for r in rows]
        summary["fields_with_ties"] = int(sum(1 for t in tied if t > 0))
        summary["total_tied_vertices"] = int(sum(tied))
    return summary


def run_resample_experiment(
    config: ExperimentConfig, qualifying_target: int | None = None
) -> tuple[dict, list[ResampleInstance]]:
    """Keep drawing seeded attempts until enough qualifying instances passed.

    ``config.trials`` caps the attempts; ``qualifying_target`` (params or
    argument) stops early once that many qualifying instances have run.
    """
    target = qualifying_target
    max_attempts = int(config.params.get("max_attempts", config.trials))
    instances: list[ResampleInstance] = []
    attempts = 0
    for trial in range(max_attempts):
        attempts += 1
        seed = _rng.spawn_seed(config.master_seed, trial)
        inst = resample_one_instance(config, seed)
        if inst is not None:
            instances.append(inst)
            if target is not None and len(instances) >= target:
                break
    passed = sum(1 for i in instances if i.passed)
    summary = {
        "attempts": attempts,
        "qualifying": len(instances),
        "passed": passed,
        "vacuous": sum(1 for i in instances if i.vacuous),
        "counterexamples": [
            {
                "seed": i.seed,
                "edge": [list(i.edge[0]), list(i.edge[1])],
                "failures": list(i.failures),
            }
            for i in instances
            if not i.passed
        ],
    }
    return summary, instances
