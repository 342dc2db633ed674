"""Finite stand-ins for infinite geodesics and their bad-vertex statistics.

A boundary ray is an optimal path from a source to a vertex of the box
horizon (|v|_inf = radius), extracted from the geodesic DAG with a fixed
deterministic rule.  Rays play the role of infinite geodesics at desk scale:
bad-vertex detection, the supremum-of-bad-indices statistic, and coalescence
classification all operate on them.

Indexing follows the convention ray[1] = source; reports use these 1-based
indices.  Index 1 itself is excluded from badness: with probe = source the
condition degenerates to an always-bad corner the definitions never exercise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fpt import GeodesicDag, PassageTimeField, extract_path
from .lattice import BoxRegion, Coord, linf_distance

# fraction of the ray tail in which a maximal bad index is considered
# horizon-censored: "no more bad points" cannot be ruled out there
HORIZON_TAIL_FRACTION = 0.10


@dataclass(frozen=True)
class Ray:
    """Optimal path from ``source`` to a box-horizon vertex."""

    source: Coord
    vertices: tuple[Coord, ...]

    def __post_init__(self):
        if self.vertices[0] != self.source:
            raise ValueError("ray must start at its source")

    def __len__(self) -> int:
        return len(self.vertices)

    def vertex(self, i: int) -> Coord:
        """1-based access: vertex(1) is the source."""
        if not 1 <= i <= len(self.vertices):
            raise IndexError(i)
        return self.vertices[i - 1]

    @property
    def terminal(self) -> Coord:
        return self.vertices[-1]


@dataclass(frozen=True)
class BadPointReport:
    """Bad indices of a ray relative to a probe source, plus the S statistic.

    ``s_statistic`` is the maximal bad index, 0 when there is none, and
    ``math.inf`` when the maximal bad index falls in the last
    HORIZON_TAIL_FRACTION of the ray: at finite scale such a ray cannot be
    distinguished from one with infinitely many bad points.
    """

    ray: Ray
    probe_source: Coord
    bad_indices: tuple[int, ...]
    s_statistic: float
    degenerate: bool = False

    @property
    def censored(self) -> bool:
        return math.isinf(self.s_statistic)


@dataclass(frozen=True)
class CoalescenceVerdict:
    rays: tuple[Ray, Ray]
    horizon: int
    shared_beyond_horizon: int
    verdict: str  # coalesce | distinct | indeterminate


def boundary_rays(dag: GeodesicDag, box: BoxRegion) -> list[Ray]:
    """One optimal path from the DAG source to every box-horizon vertex.

    Uses the lexicographically-smallest-predecessor rule, so the result is a
    deterministic function of the DAG; with unique geodesics it is the
    geodesic tree restricted to horizon leaves.
    """
    rays = []
    for wid in box.boundary_vertex_ids():
        w = box.coord(int(wid))
        rays.append(Ray(dag.source, extract_path(dag, w)))
    return rays


def _reach_from_source(dag: GeodesicDag, allowed: np.ndarray) -> np.ndarray:
    """Vertices reachable from the DAG source through ``allowed`` vertices."""
    n = dag.box.n_vertices
    indptr, succ, _ = dag.successors_csr()
    reached = np.zeros(n, dtype=bool)
    sid = dag.source_id
    if not allowed[sid]:
        return reached
    reached[sid] = True
    stack = [sid]
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            v = int(succ[k])
            if allowed[v] and not reached[v]:
                reached[v] = True
                stack.append(v)
    return reached


def exists_avoiding_optimal_path(
    dag: GeodesicDag, target: Coord, forbidden: set[Coord]
) -> tuple[bool, tuple[Coord, ...] | None]:
    """Does some optimal source->target path avoid ``forbidden`` vertices?

    Works on the predecessor relation, so it is exact in both the unique and
    the tied regime (optimal paths = self-avoiding relation paths).  Returns
    a witness path when one exists.
    """
    box = dag.box
    tid = box.vertex_id(target)
    if target in forbidden or dag.source in forbidden:
        raise ValueError("target and source must not be forbidden")
    if tid != dag.source_id and dag.pred_indptr[tid + 1] == dag.pred_indptr[tid]:
        raise ValueError("target unreachable in geodesic DAG")
    allowed = np.ones(box.n_vertices, dtype=bool)
    for v in forbidden:
        if box.contains(v):
            allowed[box.vertex_id(v)] = False
    reached = _reach_from_source(dag, allowed)
    if not reached[tid]:
        return False, None
    # witness: walk back through predecessors that the source reaches
    sid = dag.source_id
    path = [tid]
    seen = {tid}
    while path[-1] != sid:
        nxt = None
        for p in sorted(int(x) for x in dag.predecessors(path[-1])):
            if reached[p] and p not in seen:
                nxt = p
                break
        if nxt is None:  # tied plateau detour: fall back to DFS
            return _witness_dfs(dag, tid, allowed)
        path.append(nxt)
        seen.add(nxt)
    return True, tuple(box.coord(v) for v in reversed(path))


def _witness_dfs(dag: GeodesicDag, tid: int, allowed: np.ndarray):
    box = dag.box
    sid = dag.source_id
    path = [tid]
    on_path = {tid}

    def rec(v: int) -> bool:
        if v == sid:
            return True
        for p in sorted(int(x) for x in dag.predecessors(v)):
            if allowed[p] and p not in on_path:
                path.append(p)
                on_path.add(p)
                if rec(p):
                    return True
                on_path.discard(p)
                path.pop()
        return False

    if not rec(tid):
        return False, None
    return True, tuple(box.coord(v) for v in reversed(path))


def bad_indices(ray: Ray, probe_dag: GeodesicDag) -> BadPointReport:
    """Mark each ray index whose vertex some probe-optimal path meets alone.

    Index i >= 2 is bad iff an optimal path from the probe source to ray[i]
    intersects the ray exactly in {ray[i]}.  With a unique geodesic this is
    the intersection condition on the single optimal path.
    """
    probe = probe_dag.source
    interior = ray.vertices[1:]
    if probe in interior:
        return BadPointReport(ray, probe, (), 0.0, degenerate=True)
    if probe == ray.vertices[0]:
        # every probe path contains ray[1] itself, so no index i >= 2 is bad
        return BadPointReport(ray, probe, (), 0.0)
    ray_set = set(ray.vertices)
    bad = []
    for i in range(2, len(ray) + 1):
        x = ray.vertex(i)
        ok, _ = exists_avoiding_optimal_path(probe_dag, x, ray_set - {x})
        if ok:
            bad.append(i)
    s: float
    if not bad:
        s = 0.0
    else:
        s = float(max(bad))
        if s > len(ray) * (1.0 - HORIZON_TAIL_FRACTION):
            s = math.inf
    return BadPointReport(ray, probe, tuple(bad), s)


def classify_coalescence(r1: Ray, r2: Ray, horizon: int) -> CoalescenceVerdict:
    """Shared-tail test: do the rays keep meeting beyond the horizon?"""
    far1 = {
        v
        for v in r1.vertices
        if linf_distance(v, r1.source) > horizon and linf_distance(v, r2.source) > horizon
    }
    shared = [v for v in r2.vertices if v in far1]
    n_shared = len(shared)
    if n_shared > 0 and r1.terminal == r2.terminal:
        verdict = "coalesce"
    elif n_shared == 0:
        verdict = "distinct"
    else:
        verdict = "indeterminate"
    return CoalescenceVerdict((r1, r2), horizon, n_shared, verdict)


@dataclass(frozen=True)
class FamilyStatistics:
    """Minimum S over a ray family, and the passage time at the achiever.

    Finite analog of the pair (R, K): r_statistic = inf over rays of the
    S statistic; k_statistic = min over achieving rays of t(probe, ray[R]).
    Horizon-censored rays propagate the inf sentinel.
    """

    r_statistic: float
    k_statistic: float
    censored: bool


def family_statistics(
    reports: list[BadPointReport], probe_times: PassageTimeField
) -> FamilyStatistics:
    if not reports:
        raise ValueError("empty ray family")
    r = min(rep.s_statistic for rep in reports)
    if math.isinf(r):
        return FamilyStatistics(math.inf, math.inf, True)
    if r == 0.0:
        return FamilyStatistics(0.0, 0.0, False)
    k = min(
        probe_times.t_of(rep.ray.vertex(int(r)))
        for rep in reports
        if rep.s_statistic == r
    )
    return FamilyStatistics(r, float(k), any(rep.censored for rep in reports))
