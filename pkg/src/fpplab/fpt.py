"""First-passage times, the geodesic DAG, and its dynamic programs.

``shortest_paths`` computes single-source passage times inside a box.  Paths
are restricted to the box, so the result upper-bounds the free-lattice time;
the discrepancy vanishes for targets far from the boundary, and experiments
keep their targets interior.

The geodesic DAG stores, per vertex, every predecessor that attains the
passage time (within an explicit tolerance; zero in exact mode).  Paths of the
DAG from the source are exactly the optimal paths, and the pair/box
certificates are dynamic programs over it: path counts, extremal lengths,
minimal heavy-edge counts, and heavy-window analyses.

Zero-weight atoms can tie t across an edge, which puts both orientations into
the predecessor relation.  The relation is then no longer acyclic and the
dynamic programs switch to explicit self-avoiding enumeration, which matches
the brute-force oracle's path semantics; sizes stay small in that regime.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .lattice import BoxRegion, Coord
from .weights import WeightField

COUNT_SATURATION = 2**63 - 1
_ENUMERATION_LIMIT = 200_000


@dataclass(frozen=True)
class Tolerance:
    """Slack allowed when testing t(u) + w == t(v): absolute + relative."""

    absolute: float = 0.0
    relative: float = 0.0

    def __post_init__(self):
        if self.absolute < 0 or self.relative < 0:
            raise ValueError("tolerance components must be >= 0")

    @staticmethod
    def for_mode(mode: str) -> "Tolerance":
        # exact mode compares integers; float mode guards roundoff only
        return Tolerance() if mode == "exact" else Tolerance(0.0, 2.0**-40)


@dataclass(frozen=True)
class PassageTimeField:
    """Single-source passage times t(source, .) over a box."""

    source: Coord
    box: BoxRegion
    t: np.ndarray = field(repr=False)
    mode: str = "exact"

    def t_of(self, v: Coord):
        return self.t[self.box.vertex_id(v)]


def _python_dijkstra(field_: WeightField, src_id: int) -> np.ndarray:
    """Exact-arithmetic Dijkstra over python ints (fallback path)."""
    box = field_.box
    indptr, nbr, eid = box.incidence
    indptr_l = indptr.tolist()
    nbr_l = nbr.tolist()
    w_by_inc = field_.values[eid].tolist()
    n = box.n_vertices
    dist = [None] * n
    heap = [(0, src_id)]
    dist[src_id] = 0
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(indptr_l[u], indptr_l[u + 1]):
            v = nbr_l[k]
            nd = d + w_by_inc[k]
            if dist[v] is None or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return np.array(dist, dtype=np.int64 if field_.is_exact else np.float64)


def _csr_graph(field_: WeightField) -> csr_matrix:
    box = field_.box
    indptr, nbr, eid = box.incidence
    return csr_matrix(
        (field_.values[eid].astype(np.float64), nbr, indptr),
        shape=(box.n_vertices, box.n_vertices),
    )


def _verify_exact_rows(field_: WeightField, src_ids, t_rows: np.ndarray) -> bool:
    """Check int64 distance rows are the exact fixpoint + attainable.

    Slack >= 0 on every oriented edge forces t <= dist; an equality
    predecessor at every vertex forces t >= dist when all weights are
    positive (equality chains strictly descend, so they end at the source).
    Zero weights allow self-certifying plateaus, so those fields get a full
    reachability sweep instead.
    """
    box = field_.box
    u, v = box.edge_endpoints
    w = field_.values
    n = box.n_vertices
    has_zero = bool(w.size) and int(w.min()) == 0
    for row, s in zip(t_rows, src_ids):
        if row[s] != 0:
            return False
        slack_fwd = row[v] - row[u] - w  # <= 0 required
        slack_bwd = row[u] - row[v] - w
        if slack_fwd.max(initial=0) > 0 or slack_bwd.max(initial=0) > 0:
            return False
        eq_fwd = slack_fwd == 0
        eq_bwd = slack_bwd == 0
        if not has_zero:
            has_pred = np.zeros(n, dtype=bool)
            has_pred[s] = True
            has_pred[v[eq_fwd]] = True
            has_pred[u[eq_bwd]] = True
            if not has_pred.all():
                return False
            continue
        reached = np.zeros(n, dtype=bool)
        reached[s] = True
        while True:
            before = int(reached.sum())
            reached[v[eq_fwd][reached[u[eq_fwd]]]] = True
            reached[u[eq_bwd][reached[v[eq_bwd]]]] = True
            if int(reached.sum()) == before:
                break
        if not reached.all():
            return False
    return True


def shortest_paths_multi(field_: WeightField, src_ids) -> np.ndarray:
    """Passage-time rows for several sources at once (S x n_vertices)."""
    src_ids = list(int(s) for s in src_ids)
    if not field_.is_exact:
        from . import _speedkernel

        if _speedkernel.HAVE_NUMBA:
            return _speedkernel.multi_dijkstra_float(
                field_.box, field_.values, np.asarray(src_ids, np.int64)
            )
        return np.atleast_2d(_csgraph_dijkstra(_csr_graph(field_), indices=src_ids))
    t = np.atleast_2d(_csgraph_dijkstra(_csr_graph(field_), indices=src_ids))
    t_int = np.rint(t).astype(np.int64)
    if _verify_exact_rows(field_, src_ids, t_int):
        return t_int
    # float64 roundoff detected: redo the affected computation exactly
    return np.stack([_python_dijkstra(field_, s) for s in src_ids])


def shortest_paths(field_: WeightField, source: Coord) -> PassageTimeField:
    """Exact single-source passage times from ``source``, box-restricted."""
    sid = field_.box.vertex_id(source)
    t = shortest_paths_multi(field_, [sid])[0]
    return PassageTimeField(source=source, box=field_.box, t=t, mode=field_.mode)


def all_pairs_times(field_: WeightField) -> np.ndarray:
    """All-pairs passage times by synchronous relaxation sweeps.

    Deliberately a different algorithm from ``shortest_paths`` (Bellman-style
    fixpoint instead of a priority queue) so the two can cross-check each
    other on sampled fields.  Exact in int64 for exact mode.
    """
    box = field_.box
    n = box.n_vertices
    u, v = box.edge_endpoints
    axes = box.edge_axes
    out_dtype = None
    if field_.is_exact:
        total = int(field_.values.sum()) if field_.values.size else 0
        if total < 2**30:  # every distance fits int32 with sentinel headroom
            t = np.full((n, n), np.int32(2**30), dtype=np.int32)
            values = field_.values.astype(np.int32)
            out_dtype = np.int64
        else:
            t = np.full((n, n), np.int64(2**62), dtype=np.int64)
            values = field_.values
    else:
        t = np.full((n, n), np.inf, dtype=np.float64)
        values = field_.values
    np.fill_diagonal(t, 0)
    # within one axis and orientation every target column is distinct, so the
    # fancy-indexed minimum below loses no updates
    groups = []
    for axis in range(box.dimension):
        sel = axes == axis
        groups.append((u[sel], v[sel], values[sel]))
        groups.append((v[sel], u[sel], values[sel]))
    while True:
        changed = False
        for uu, vv, w in groups:
            cand = t[:, uu]
            cand += w
            cur = t[:, vv]
            better = cand < cur
            if better.any():
                t[:, vv] = np.where(better, cand, cur)
                changed = True
        if not changed:
            break
    return t.astype(out_dtype) if out_dtype is not None else t


# -- geodesic DAG -------------------------------------------------------------


@dataclass
class GeodesicDag:
    """Predecessor structure of all optimal paths from one source.

    ``pred_indptr``/``pred_vertex``/``pred_edge`` form a CSR over target
    vertices.  ``two_way_ties`` marks the zero-tie regime in which the
    relation is not acyclic and enumeration replaces the DPs.
    """

    source: Coord
    box: BoxRegion
    t: np.ndarray
    tolerance: Tolerance
    mode: str
    pred_indptr: np.ndarray
    pred_vertex: np.ndarray
    pred_edge: np.ndarray
    edge_weights: np.ndarray
    two_way_ties: bool
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def source_id(self) -> int:
        return self.box.vertex_id(self.source)

    def predecessors(self, vid: int) -> np.ndarray:
        return self.pred_vertex[self.pred_indptr[vid] : self.pred_indptr[vid + 1]]

    def pred_edge_ids(self, vid: int) -> np.ndarray:
        return self.pred_edge[self.pred_indptr[vid] : self.pred_indptr[vid + 1]]

    def pred_count(self) -> np.ndarray:
        """Number of optimal predecessors per vertex (0 at the source)."""
        return np.diff(self.pred_indptr)

    def topo_order(self) -> np.ndarray:
        if "topo" not in self._cache:
            if self.two_way_ties:
                raise ValueError("tied relation has no topological order")
            self._cache["topo"] = np.argsort(self.t, kind="stable")
        return self._cache["topo"]

    def successors_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if "succ" not in self._cache:
            order = np.argsort(self.pred_vertex, kind="stable")
            n = self.box.n_vertices
            targets = np.repeat(
                np.arange(n, dtype=np.int64), np.diff(self.pred_indptr)
            )
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, self.pred_vertex + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._cache["succ"] = (indptr, targets[order], self.pred_edge[order])
        return self._cache["succ"]


def build_geodesic_dag(
    ptf: PassageTimeField, field_: WeightField, tolerance: Tolerance | None = None
) -> GeodesicDag:
    """All optimal predecessors per vertex, per the tolerance rule.

    Directed edge u->v is included iff t(u) + w <= t(v) + abs + rel*t(v).
    """
    if tolerance is None:
        tolerance = Tolerance.for_mode(field_.mode)
    box = field_.box
    u, v = box.edge_endpoints
    w = field_.values
    t = ptf.t
    if field_.is_exact:
        fwd = t[u] + w == t[v]
        bwd = t[v] + w == t[u]
        if tolerance.absolute or tolerance.relative:
            slack_v = tolerance.absolute + tolerance.relative * t[v]
            slack_u = tolerance.absolute + tolerance.relative * t[u]
            fwd = t[u] + w <= t[v] + slack_v
            bwd = t[v] + w <= t[u] + slack_u
    else:
        fwd = t[u] + w <= t[v] + tolerance.absolute + tolerance.relative * t[v]
        bwd = t[v] + w <= t[u] + tolerance.absolute + tolerance.relative * t[u]
    two_way = bool(np.any(fwd & bwd))

    n = box.n_vertices
    m = int(u.shape[0])
    eids = np.arange(m, dtype=np.int64)
    tgt = np.concatenate([v[fwd], u[bwd]])
    src = np.concatenate([u[fwd], v[bwd]])
    eid = np.concatenate([eids[fwd], eids[bwd]])
    order = np.argsort(tgt, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, tgt + 1, 1)
    np.cumsum(indptr, out=indptr)
    return GeodesicDag(
        source=ptf.source,
        box=box,
        t=t,
        tolerance=tolerance,
        mode=field_.mode,
        pred_indptr=indptr,
        pred_vertex=src[order],
        pred_edge=eid[order],
        edge_weights=w,
        two_way_ties=two_way,
    )


def _enumerate_ids(dag: GeodesicDag, target_id: int, limit: int = _ENUMERATION_LIMIT):
    """All self-avoiding source->target paths of the predecessor relation.

    Exact fallback for tied fields; exponential in the worst case, so callers
    keep boxes small.  Returns tuples of vertex ids, source first.
    """
    sid = dag.source_id
    out = []
    path = [target_id]
    on_path = {target_id}

    def rec(vid: int):
        if vid == sid:
            out.append(tuple(reversed(path)))
            if len(out) > limit:
                raise RuntimeError("optimal-path enumeration limit exceeded")
            return
        for p in dag.predecessors(vid):
            p = int(p)
            if p not in on_path:
                path.append(p)
                on_path.add(p)
                rec(p)
                on_path.discard(p)
                path.pop()

    rec(target_id)
    return out


def _check_reachable(dag: GeodesicDag, target_id: int):
    if target_id != dag.source_id and dag.pred_indptr[target_id + 1] == dag.pred_indptr[target_id]:
        raise ValueError("target unreachable in geodesic DAG")


def _ancestor_order(dag: GeodesicDag, target_id: int) -> list[int]:
    """Backward closure of the target in topological (t-ascending) order.

    The dynamic programs only ever need this closure, which for one target is
    a thin cone rather than the whole box.
    """
    key = ("closure", target_id)
    if key not in dag._cache:
        seen = {target_id}
        stack = [target_id]
        indptr, preds = dag.pred_indptr, dag.pred_vertex
        while stack:
            v = stack.pop()
            for k in range(indptr[v], indptr[v + 1]):
                p = int(preds[k])
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        t = dag.t
        dag._cache[key] = sorted(seen, key=lambda v: (t[v], v))
    return dag._cache[key]


def _closure_dp(dag: GeodesicDag, target_id: int, init, combine):
    """Generic forward DP over the target's ancestor closure.

    ``init`` is the source value; ``combine(acc, pred_value, edge_id)``
    folds one predecessor edge into the accumulator (None accumulator starts).
    """
    order = _ancestor_order(dag, target_id)
    sid = dag.source_id
    val = {sid: init}
    indptr, preds, eids = dag.pred_indptr, dag.pred_vertex, dag.pred_edge
    for vid in order:
        if vid == sid:
            continue
        acc = None
        for k in range(indptr[vid], indptr[vid + 1]):
            p = int(preds[k])
            if p in val:
                acc = combine(acc, val[p], int(eids[k]))
        if acc is not None:
            val[vid] = acc
    return val[target_id]


def count_optimal_paths(
    dag: GeodesicDag, target: Coord, exact: bool = False
) -> tuple[int, bool]:
    """Number of distinct optimal source->target paths.

    Returns (count, saturated); saturates at 2**63 - 1 unless ``exact``.
    """
    tid = dag.box.vertex_id(target)
    _check_reachable(dag, tid)
    if dag.two_way_ties:
        c = len(_enumerate_ids(dag, tid))
    else:
        c = _closure_dp(dag, tid, 1, lambda acc, pv, e: (acc or 0) + pv)
    if exact or c <= COUNT_SATURATION:
        return c, False
    return COUNT_SATURATION, True


def extremal_path_lengths(dag: GeodesicDag, target: Coord) -> tuple[int, int]:
    """(min, max) edge count over all optimal source->target paths."""
    tid = dag.box.vertex_id(target)
    _check_reachable(dag, tid)
    if dag.two_way_ties:
        paths = _enumerate_ids(dag, tid)
        lens = [len(p) - 1 for p in paths]
        return min(lens), max(lens)

    def combine(acc, pv, e):
        lo, hi = pv[0] + 1, pv[1] + 1
        if acc is None:
            return (lo, hi)
        return (min(acc[0], lo), max(acc[1], hi))

    return _closure_dp(dag, tid, (0, 0), combine)


def min_heavy_edges(dag: GeodesicDag, target: Coord, threshold) -> int:
    """Minimum over optimal paths of edges with weight >= threshold.

    ``threshold`` is in storage units (grid numerator for exact fields); use
    ``WeightField.heavy_threshold`` to convert from value units.
    """
    tid = dag.box.vertex_id(target)
    _check_reachable(dag, tid)
    if dag.two_way_ties:
        heavy = dag.edge_weights >= threshold
        eids_of = _paths_edge_ids(dag, tid)
        return min(int(heavy[list(es)].sum()) for es in eids_of)
    heavy = dag.edge_weights >= threshold

    def combine(acc, pv, e):
        c = pv + (1 if heavy[e] else 0)
        return c if acc is None or c < acc else acc

    return _closure_dp(dag, tid, 0, combine)


def _paths_edge_ids(dag: GeodesicDag, target_id: int):
    """Edge-id tuples of every enumerated optimal path (tied mode helper)."""
    from .lattice import edge_between

    box = dag.box
    out = []
    for p in _enumerate_ids(dag, target_id):
        out.append(
            tuple(
                box.edge_id(edge_between(box.coord(a), box.coord(b)))
                for a, b in zip(p, p[1:])
            )
        )
    return out


def extract_path(dag: GeodesicDag, target: Coord) -> tuple[Coord, ...]:
    """One optimal path, chosen by lexicographically smallest predecessor.

    Deterministic; in tied mode falls back to depth-first search so the walk
    cannot dead-end on a zero-weight plateau.
    """
    box = dag.box
    tid = box.vertex_id(target)
    _check_reachable(dag, tid)
    sid = dag.source_id

    def pred_coords(vid):
        ps = [int(p) for p in dag.predecessors(vid)]
        if len(ps) > 1:
            ps.sort(key=box.coord)
        return ps

    if not dag.two_way_ties:
        path = [tid]
        while path[-1] != sid:
            path.append(pred_coords(path[-1])[0])
        return tuple(box.coord(v) for v in reversed(path))

    path = [tid]
    on_path = {tid}

    def rec(vid):
        if vid == sid:
            return True
        for p in pred_coords(vid):
            if p not in on_path:
                path.append(p)
                on_path.add(p)
                if rec(p):
                    return True
                on_path.discard(p)
                path.pop()
        return False

    if not rec(tid):
        raise ValueError("target unreachable in geodesic DAG")
    return tuple(box.coord(v) for v in reversed(path))


def is_unique_geodesic(dag: GeodesicDag, target: Coord) -> bool:
    count, _ = count_optimal_paths(dag, target)
    return count == 1


def path_weight(field_: WeightField, path: tuple[Coord, ...]):
    """Total weight of an explicit path, in storage units."""
    from .lattice import edge_between

    total = 0
    for a, b in zip(path, path[1:]):
        total += field_.weight_of(edge_between(a, b))
    return total


def count_heavy_windows(
    path: tuple[Coord, ...], field_: WeightField, window_len: int, alpha2
) -> int:
    """Start offsets i such that the next window_len edges all weigh >= alpha2.

    ``alpha2`` in storage units.  A window is a length-``window_len`` sub-path
    in the contiguous sense; paths shorter than the window yield 0.
    """
    from .lattice import edge_between

    if window_len <= 0:
        raise ValueError("window length must be positive")
    n_edges = len(path) - 1
    if n_edges < window_len:
        return 0
    heavy = [field_.weight_of(edge_between(a, b)) >= alpha2 for a, b in zip(path, path[1:])]
    run = 0
    count = 0
    for i, h in enumerate(heavy):
        run = run + 1 if h else 0
        if run >= window_len:
            count += 1
    return count


@dataclass(frozen=True)
class PathStats:
    """Aggregates of the optimal-path set toward one target."""

    target: Coord
    count: int
    count_saturated: bool
    min_len: int
    max_len: int
    min_heavy: int


def path_stats(
    dag: GeodesicDag, field_: WeightField, target: Coord, heavy_threshold
) -> PathStats:
    count, sat = count_optimal_paths(dag, target)
    mn, mx = extremal_path_lengths(dag, target)
    heavy = min_heavy_edges(dag, target, heavy_threshold)
    return PathStats(target, count, sat, mn, mx, heavy)


def time_below_cap(field_: WeightField, source: Coord, target: Coord, cap) -> bool:
    """Whether t(source, target) < cap, by cap-pruned Dijkstra.

    Explores only the sub-cluster reachable at cost < cap, which makes rare
    low-time events cheap to test on large ensembles.
    """
    box = field_.box
    sid, tid = box.vertex_id(source), box.vertex_id(target)
    indptr, nbr, eid = box.incidence
    w = field_.values
    dist = {sid: 0}
    heap = [(0, sid)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, d):
            continue
        if u == tid:
            return True
        for k in range(indptr[u], indptr[u + 1]):
            v = int(nbr[k])
            nd = d + w[eid[k]]
            if nd < cap and nd < dist.get(v, nd + 1):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return False
