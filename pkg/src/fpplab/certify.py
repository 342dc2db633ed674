"""Pair certificates, box-scan events, and the n-box classification.

A pair (a, b) is certified by three inequalities tying l1 distance, passage
time, and heavy-edge content of its optimal paths to a common size measure:

* ``black``: the unique optimal path; size is its length (or the path count,
  both readings are exposed); heavy edges are those with weight >= 3M.
* ``black2``: like black, but the third clause counts length-M windows of the
  path whose edges all weigh >= alpha2 (bounded-support variant).
* ``black3``: no uniqueness assumed; size is the maximal optimal-path length
  and the heavy clause takes the minimum over all optimal paths.

A scan event checks every ordered pair of [-k, k]^d: far pairs (l1 >= sqrt k)
must be certified, close pairs must have small optimal-path size.  Both
published "otherwise" caps (k/2 and delta*k) are exposed as parameters.

The n-box layer classifies slab regions touching a geodesic as black (weight
regularity), white (the geodesic crosses the slab the short way), gray (both),
and good (every optimal path carries a fully-heavy window inside the slab).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from . import _rng
from .fpt import (
    GeodesicDag,
    _check_reachable,
    build_geodesic_dag,
    count_heavy_windows,
    count_optimal_paths,
    extract_path,
    extremal_path_lengths,
    min_heavy_edges,
    shortest_paths,
    shortest_paths_multi,
)
from .lattice import Coord, edge_between, l1_distance
from .weights import DistributionSpec, WeightField, threshold_to_grid


class InteriorityError(ValueError):
    """Pair or box too close to the boundary for truncation-safe certification."""


class NonUniqueGeodesicError(ValueError):
    """black/black2 certification requires a unique optimal path."""


@dataclass(frozen=True)
class BlackParams:
    mode: str  # black | black2 | black3
    delta: float
    m: float
    alpha2: float | None = None
    size_reading: str = "path-length"  # black only: path-length | path-count

    def __post_init__(self):
        if self.mode not in ("black", "black2", "black3"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.delta <= 0 or self.m <= 0:
            raise ValueError("delta and m must be positive")
        if self.mode == "black2":
            if self.alpha2 is None:
                raise ValueError("black2 requires alpha2")
            if int(self.m) != self.m:
                raise ValueError("black2 window length m must be an integer")
        if self.size_reading not in ("path-length", "path-count"):
            raise ValueError(f"unknown size reading {self.size_reading!r}")

    @property
    def heavy_threshold(self) -> float:
        return 3.0 * self.m


@dataclass(frozen=True)
class Clause:
    name: str
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class CertificateReport:
    a: Coord
    b: Coord
    mode: str
    clauses: tuple[Clause, ...]
    holds: bool
    first_failing: str | None


def _make_report(a, b, mode, raw_clauses) -> CertificateReport:
    clauses = tuple(Clause(n, float(l), float(r), h) for n, l, r, h in raw_clauses)
    failing = next((c.name for c in clauses if not c.holds), None)
    return CertificateReport(a, b, mode, clauses, failing is None, failing)


def _three_clauses(field_, dist_ab, t_storage, heavy, delta, size):
    """The shared clause pattern: distance, time, heavy content vs delta*size.

    Integer left-hand sides compare against Fraction(delta)*size exactly; the
    time clause is exact on the grid in exact mode and float otherwise.
    """
    rhs = Fraction(delta) * size
    rhs_f = float(delta) * size
    if field_.is_exact:
        t_val = Fraction(int(t_storage), 1 << field_.grid_log2)
        time_holds = t_val >= rhs
        t_float = float(t_val)
    else:
        t_float = float(t_storage)
        time_holds = t_float >= rhs_f
    return [
        ("distance", dist_ab, rhs_f, Fraction(dist_ab) >= rhs),
        ("time", t_float, rhs_f, time_holds),
        ("heavy", heavy, rhs_f, Fraction(heavy) >= rhs),
    ]


def _unique_path_or_raise(dag: GeodesicDag, target: Coord):
    """The unique optimal path, or raise.

    In the acyclic regime the path count is 1 exactly when every vertex on
    the backward walk has a single predecessor, so uniqueness costs O(path)
    rather than a dynamic program over the ancestor cone.
    """
    box = dag.box
    tid = box.vertex_id(target)
    if dag.two_way_ties:
        count, _ = count_optimal_paths(dag, target)
        if count != 1:
            raise NonUniqueGeodesicError(
                f"{dag.source}->{target} has {count} optimal paths"
            )
        return extract_path(dag, target)
    _check_reachable(dag, tid)
    sid = dag.source_id
    indptr, preds = dag.pred_indptr, dag.pred_vertex
    path = [tid]
    v = tid
    while v != sid:
        lo, hi = indptr[v], indptr[v + 1]
        if hi - lo != 1:
            raise NonUniqueGeodesicError(f"{dag.source}->{target} is not unique")
        v = int(preds[lo])
        path.append(v)
    return tuple(box.coord(u) for u in reversed(path))


def certify_pair(
    field_: WeightField,
    a: Coord,
    b: Coord,
    params: BlackParams,
    enforce_margin: bool = True,
    _dag: GeodesicDag | None = None,
) -> CertificateReport:
    """Evaluate the three clauses of the configured certificate for (a, b).

    The default margin rule requires both endpoints to sit at l-inf distance
    >= |a-b|_1 from the box boundary, so box truncation cannot change the
    optimal-path set; scans enforce their own coarser margin instead.
    """
    box = field_.box
    dist_ab = l1_distance(a, b)
    if enforce_margin:
        margin = min(
            box.radius - max(abs(c) for c in a), box.radius - max(abs(c) for c in b)
        )
        if margin < dist_ab:
            raise InteriorityError(
                f"pair {a},{b} needs l-inf margin {dist_ab}, has {margin}"
            )
    if _dag is None:
        ptf = shortest_paths(field_, a)
        _dag = build_geodesic_dag(ptf, field_)
    dag = _dag
    t_b = dag.t[box.vertex_id(b)]

    if params.mode == "black3":
        _, max_len = extremal_path_lengths(dag, b)
        heavy = min_heavy_edges(dag, b, field_.heavy_threshold(params.heavy_threshold))
        raw = _three_clauses(field_, dist_ab, t_b, heavy, params.delta, max_len)
        return _make_report(a, b, params.mode, raw)

    if params.mode == "black2" and not (
        field_.dist.f_minus < params.alpha2 < field_.dist.f_plus
    ):
        raise ValueError(
            f"alpha2={params.alpha2} must lie strictly inside the support "
            f"({field_.dist.f_minus}, {field_.dist.f_plus})"
        )
    path = _unique_path_or_raise(dag, b)
    size = len(path) - 1 if params.size_reading == "path-length" else 1
    if params.mode == "black":
        thr = field_.heavy_threshold(params.heavy_threshold)
        heavy = sum(
            1
            for x, y in zip(path, path[1:])
            if field_.weight_of(edge_between(x, y)) >= thr
        )
    else:  # black2: full-weight windows of length m
        heavy = count_heavy_windows(
            path, field_, int(params.m), field_.heavy_threshold(params.alpha2)
        )
    raw = _three_clauses(field_, dist_ab, t_b, heavy, params.delta, size)
    return _make_report(a, b, params.mode, raw)


@dataclass(frozen=True)
class ScanViolation:
    a: Coord
    b: Coord
    clause: str


@dataclass(frozen=True)
class ScanReport:
    k: int
    mode: str
    otherwise_cap: float
    pairs_total: int
    pairs_checked: int
    subsampled: bool
    violations: tuple[ScanViolation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def _scan_pairs(side_coords, budget, seed):
    """Ordered-pair index list, uniformly subsampled past the budget.

    Subsampling hashes a counter stream modulo the pair count and keeps the
    first ``budget`` distinct values: uniform without replacement, O(budget),
    and deterministic in the seed.
    """
    n = len(side_coords)
    total = n * n
    if budget is None or total <= budget:
        return np.arange(total, dtype=np.int64), total, False
    chosen: dict[int, None] = {}
    j = 0
    while len(chosen) < budget:
        block = _rng.hash_words(seed, np.arange(j, j + 2 * budget, dtype=np.uint64))
        for h in (block % np.uint64(total)).tolist():
            if h not in chosen:
                chosen[h] = None
                if len(chosen) == budget:
                    break
        j += 2 * budget
    return np.array(sorted(chosen), dtype=np.int64), total, True


def scan_event(
    field_: WeightField,
    k: int,
    params: BlackParams,
    mode: str = "C",
    otherwise_rule: str = "half-k",
    budget: int | None = None,
    subsample_seed: int = 0,
) -> ScanReport:
    """Check the pair dichotomy over [-k, k]^d.

    Far pairs (|a-b|_1 >= sqrt k) must satisfy the mode's certificate
    (C -> black, C2 -> black2, C3 -> black3); the rest must have small
    optimal-path size.  ``otherwise_rule`` selects the published cap:
    "half-k" (k/2) or "delta-k" (delta * k).
    """
    box = field_.box
    expected = {"C": "black", "C2": "black2", "C3": "black3"}
    if mode not in expected:
        raise ValueError(f"unknown scan mode {mode!r}")
    if params.mode != expected[mode]:
        raise ValueError(f"scan mode {mode} needs params.mode={expected[mode]!r}")
    if box.radius < 2 * k:
        raise InteriorityError(f"scan at k={k} needs box radius >= {2 * k}")
    if budget is not None and budget <= 0:
        raise ValueError("budget must be positive or None")
    if otherwise_rule == "half-k":
        cap = k / 2
    elif otherwise_rule == "delta-k":
        cap = params.delta * k
    else:
        raise ValueError(f"unknown otherwise rule {otherwise_rule!r}")

    coords = [
        c
        for c in map(tuple, box.all_coords().tolist())
        if max(abs(x) for x in c) <= k
    ]
    idx, total, sub = _scan_pairs(coords, budget, subsample_seed)
    n = len(coords)
    sqrt_k = math.sqrt(k)

    by_source: dict[int, list[int]] = {}
    for i in idx.tolist():
        by_source.setdefault(i // n, []).append(i % n)

    violations = []
    checked = 0
    for ai in sorted(by_source):
        a = coords[ai]
        ptf = shortest_paths(field_, a)
        dag = build_geodesic_dag(ptf, field_)
        for bi in sorted(by_source[ai]):
            b = coords[bi]
            checked += 1
            far = l1_distance(a, b) >= sqrt_k
            if far:
                try:
                    rep = certify_pair(
                        field_, a, b, params, enforce_margin=False, _dag=dag
                    )
                except NonUniqueGeodesicError:
                    violations.append(ScanViolation(a, b, "non-unique"))
                    continue
                if not rep.holds:
                    violations.append(ScanViolation(a, b, rep.first_failing))
            else:
                if mode == "C3":
                    _, size = extremal_path_lengths(dag, b)
                else:
                    if params.size_reading == "path-count":
                        size, _ = count_optimal_paths(dag, b)
                    else:
                        try:
                            size = len(_unique_path_or_raise(dag, b)) - 1
                        except NonUniqueGeodesicError:
                            violations.append(ScanViolation(a, b, "non-unique"))
                            continue
                if size > cap:
                    violations.append(ScanViolation(a, b, "otherwise-size"))
    return ScanReport(
        k=k,
        mode=mode,
        otherwise_cap=cap,
        pairs_total=total,
        pairs_checked=checked,
        subsampled=sub,
        violations=tuple(violations),
    )


# -- n-box geometry ------------------------------------------------------------


@dataclass(frozen=True)
class NBox:
    """Direction slab B^j(l; n) = T(l; n) intersected with its 2n-shift.

    ``block`` is the integer block index l, ``direction`` the signed axis j in
    {+-1, ..., +-d}.  S is the core n-cube, T the surrounding (3n+1)-cube, and
    B the slab of thickness n+1 along |j|.
    """

    block: tuple[int, ...]
    n: int
    direction: int

    def __post_init__(self):
        d = len(self.block)
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.direction == 0 or abs(self.direction) > d:
            raise ValueError(f"direction must be in +-1..+-{d}")

    @property
    def axis(self) -> int:
        return abs(self.direction) - 1

    @property
    def sign(self) -> int:
        return 1 if self.direction > 0 else -1

    def s_bounds(self) -> tuple[tuple[int, int], ...]:
        return tuple((self.n * l, self.n * (l + 1) - 1) for l in self.block)

    def t_bounds(self) -> tuple[tuple[int, int], ...]:
        return tuple((self.n * l - self.n, self.n * (l + 2)) for l in self.block)

    def b_bounds(self) -> tuple[tuple[int, int], ...]:
        out = []
        for i, l in enumerate(self.block):
            lo, hi = self.n * l - self.n, self.n * (l + 2)
            if i == self.axis:
                if self.sign > 0:
                    lo = self.n * (l + 1)
                else:
                    hi = self.n * l
            out.append((lo, hi))
        return tuple(out)

    def short_faces(self) -> tuple[int, int]:
        """The two bounding values of B along the slab axis."""
        lo, hi = self.b_bounds()[self.axis]
        return lo, hi

    @staticmethod
    def _inside(v: Coord, bounds) -> bool:
        return all(lo <= c <= hi for c, (lo, hi) in zip(v, bounds))

    def in_b(self, v: Coord) -> bool:
        return self._inside(v, self.b_bounds())

    def in_t(self, v: Coord) -> bool:
        return self._inside(v, self.t_bounds())

    def b_vertex_count(self) -> int:
        out = 1
        for lo, hi in self.b_bounds():
            out *= hi - lo + 1
        return out


@dataclass(frozen=True)
class RThresholds:
    """Support bounds nudged by r^-2 where the support carries no atom."""

    r: float
    f_plus_r: float
    f_minus_r: float

    @staticmethod
    def for_distribution(dist: DistributionSpec, r: float) -> "RThresholds":
        if r <= 0:
            raise ValueError("r must be positive")
        eps = r**-2
        if math.isinf(dist.f_plus):
            fp = math.inf
        elif dist.atom_at_f_plus > 0:
            fp = dist.f_plus
        else:
            fp = dist.f_plus - eps
        fm = dist.f_minus if dist.atom_at_f_minus > 0 else dist.f_minus + eps
        return RThresholds(r, fp, fm)

    @staticmethod
    def minimal_r(dist: DistributionSpec, delta: float, alpha2: float) -> float:
        """Smallest r above which the thresholds bracket F- + delta/2 and alpha2."""
        if not dist.f_minus < alpha2:
            raise ValueError("alpha2 must exceed f_minus")
        if not math.isinf(dist.f_plus) and alpha2 >= dist.f_plus:
            raise ValueError("alpha2 must stay below f_plus")
        candidates = [0.0]
        if dist.atom_at_f_minus == 0:
            # F- + r^-2 < F- + delta/2, and F- + r^-2 <= alpha2
            candidates.append(math.sqrt(2.0 / delta))
            candidates.append(math.sqrt(1.0 / (alpha2 - dist.f_minus)))
        if not math.isinf(dist.f_plus) and dist.atom_at_f_plus == 0:
            # F+ - r^-2 > F- + delta/2, and F+ - r^-2 >= alpha2
            gap = dist.f_plus - dist.f_minus - delta / 2.0
            if gap <= 0:
                raise ValueError("delta too large for the support width")
            candidates.append(math.sqrt(1.0 / gap))
            candidates.append(math.sqrt(1.0 / (dist.f_plus - alpha2)))
        return max(candidates)

    def satisfies_bracketing(self, dist: DistributionSpec, delta: float, alpha2: float) -> bool:
        mid = dist.f_minus + delta / 2.0
        return (
            self.f_minus_r < mid < self.f_plus_r
            and self.f_minus_r <= alpha2 <= self.f_plus_r
        )


@dataclass(frozen=True)
class NBoxTuning:
    delta_speed: float
    r_thresholds: RThresholds
    window_len: int
    alpha2: float

    def __post_init__(self):
        if self.delta_speed <= 0 or self.window_len <= 0 or self.alpha2 < 0:
            raise ValueError("invalid n-box tuning")


@dataclass(frozen=True)
class NBoxColor:
    nbox: NBox
    black: bool
    white: bool
    good: bool
    speed_violation: tuple | None = None
    cap_violation: tuple | None = None
    crossing: tuple | None = None
    heavy_window: tuple | None = None

    @property
    def gray(self) -> bool:
        return self.black and self.white


def _path_crossing(path, nbox: NBox) -> tuple | None:
    """First short-direction crossing of B by the path, if any.

    A crossing is a sub-path inside T whose endpoints lie on the two opposite
    short faces of B (inside B), in either order.
    """
    lo, hi = nbox.short_faces()
    axis = nbox.axis
    seg_start = None
    first_lo = first_hi = None
    for idx, v in enumerate(path):
        if nbox.in_t(v):
            if seg_start is None:
                seg_start = idx
                first_lo = first_hi = None
            if nbox.in_b(v):
                if v[axis] == lo:
                    if first_hi is not None:
                        return (first_hi, idx)
                    if first_lo is None:
                        first_lo = idx
                if v[axis] == hi:
                    if first_lo is not None:
                        return (first_lo, idx)
                    if first_hi is None:
                        first_hi = idx
        else:
            seg_start = None
            first_lo = first_hi = None
    return None


def _b_membership(field_: WeightField, nbox: NBox) -> np.ndarray:
    coords = field_.box.all_coords()
    in_b = np.ones(field_.box.n_vertices, dtype=bool)
    for i, (lo, hi) in enumerate(nbox.b_bounds()):
        in_b &= (coords[:, i] >= lo) & (coords[:, i] <= hi)
    return in_b


def _black_check(field_: WeightField, nbox: NBox, tuning: NBoxTuning):
    """Conditions (1) speed inside B and (2) weight cap on edges meeting B.

    The cap F+ - 1/r applies only when the support is bounded with no atom on
    top; otherwise condition (2) is dropped (atom on top) or vacuous
    (unbounded support).
    """
    box = field_.box
    bb = nbox.b_bounds()
    for lo, hi in bb:
        if lo < -box.radius or hi > box.radius:
            raise InteriorityError(f"n-box {nbox} leaves the field box")
    dist = field_.dist
    in_b = _b_membership(field_, nbox)

    cap_violation = None
    if dist.atom_at_f_plus == 0 and not math.isinf(dist.f_plus):
        cap = dist.f_plus - 1.0 / tuning.r_thresholds.r
        u, v = box.edge_endpoints
        touching = np.nonzero(in_b[u] | in_b[v])[0]
        wvals = field_.float_values()[touching]
        bad = np.nonzero(wvals > cap)[0]
        if bad.size:
            eid = int(touching[bad[0]])
            cap_violation = (box.edge(eid), float(wvals[bad[0]]), cap)

    b_ids = np.nonzero(in_b)[0]
    t_rows = None
    if not field_.is_exact:
        from . import _speedkernel

        if _speedkernel.HAVE_NUMBA:
            t_rows = _speedkernel.pairwise_times_float(box, field_.values, b_ids)
    if t_rows is None:
        t_rows = shortest_paths_multi(field_, b_ids)[:, b_ids]
    bc = box.all_coords()[b_ids]
    l1 = np.abs(bc[:, None, :] - bc[None, :, :]).sum(axis=2)
    need = l1 >= nbox.n ** (1.0 / 3.0)
    speed = dist.f_minus + tuning.delta_speed
    if field_.is_exact:
        # t_grid >= ceil(speed * l1 * 2^g), evaluated exactly per l1 value
        rhs = np.zeros_like(l1, dtype=np.int64)
        for val in np.unique(l1[need]):
            rhs[l1 == val] = threshold_to_grid(
                float(speed) * int(val), field_.grid_log2
            )
        viol = need & (t_rows < rhs)
    else:
        viol = need & (t_rows < speed * l1)
    speed_violation = None
    if viol.any():
        i, j = np.argwhere(viol)[0]
        scale = float(1 << field_.grid_log2) if field_.is_exact else 1.0
        speed_violation = (
            tuple(int(c) for c in bc[i]),
            tuple(int(c) for c in bc[j]),
            float(t_rows[i, j]) / scale,
            float(speed * l1[i, j]),
        )
    black = speed_violation is None and cap_violation is None
    return black, speed_violation, cap_violation


def _good_check(dag: GeodesicDag, field_: WeightField, nbox: NBox, tuning: NBoxTuning, target: Coord):
    """Does every optimal path carry a length-m all-heavy window inside B?

    Forward DP over (vertex, current heavy-in-B streak) for paths that have
    not yet completed a window; the target is windowless-reachable iff some
    state survives there.
    """
    box = dag.box
    tid = box.vertex_id(target)
    m = tuning.window_len
    thr = field_.heavy_threshold(tuning.alpha2)
    coords = box.all_coords()
    bb = nbox.b_bounds()
    in_b = np.ones(box.n_vertices, dtype=bool)
    for i, (lo, hi) in enumerate(bb):
        in_b &= (coords[:, i] >= lo) & (coords[:, i] <= hi)
    heavy_edge = field_.values >= thr

    if dag.two_way_ties:
        from .fpt import _enumerate_ids

        for p in _enumerate_ids(dag, tid):
            run = 0
            found = False
            for a_id, b_id in zip(p, p[1:]):
                e = _edge_id_between(box, a_id, b_id)
                if heavy_edge[e] and in_b[a_id] and in_b[b_id]:
                    run += 1
                    if run >= m:
                        found = True
                        break
                else:
                    run = 0
            if not found:
                return False
        return True

    # bitmask of live streak values per vertex: bit s set iff some windowless
    # path reaches the vertex with s consecutive heavy-in-B edges behind it
    full = (1 << (m + 1)) - 1
    states = [0] * box.n_vertices
    sid = dag.source_id
    states[sid] = 1  # streak 0
    indptr, preds, eids = dag.pred_indptr, dag.pred_vertex, dag.pred_edge
    for vid in dag.topo_order():
        vid = int(vid)
        if vid == sid:
            continue
        acc = 0
        for kk in range(indptr[vid], indptr[vid + 1]):
            u = int(preds[kk])
            su = states[u]
            if su == 0:
                continue
            e = int(eids[kk])
            if heavy_edge[e] and in_b[u] and in_b[vid]:
                shifted = (su << 1) & full
                shifted &= ~(1 << m)  # paths completing their window drop out
                acc |= shifted
            else:
                acc |= 1  # streak resets to 0
        states[vid] = acc
    return states[tid] == 0


def _edge_id_between(box, a_id: int, b_id: int) -> int:
    from .lattice import edge_between

    return box.edge_id(edge_between(box.coord(a_id), box.coord(b_id)))


def nbox_classify(
    field_: WeightField,
    nbox: NBox,
    geodesic_target: Coord,
    tuning: NBoxTuning,
    source: Coord | None = None,
    _dag: GeodesicDag | None = None,
    _path: tuple[Coord, ...] | None = None,
) -> NBoxColor:
    """Black/white/good flags of one n-box relative to one geodesic.

    White and good are judged against the optimal paths from ``source``
    (origin by default) to ``geodesic_target``: white uses the deterministic
    extracted path, good quantifies over every optimal path via the DAG.
    """
    box = field_.box
    if source is None:
        source = (0,) * box.dimension
    if _dag is None:
        ptf = shortest_paths(field_, source)
        _dag = build_geodesic_dag(ptf, field_)
    if _path is None:
        _path = extract_path(_dag, geodesic_target)

    black, speed_v, cap_v = _black_check(field_, nbox, tuning)
    crossing = _path_crossing(_path, nbox)
    white = crossing is not None
    good = _good_check(_dag, field_, nbox, tuning, geodesic_target)
    window = None
    if good:
        window = _window_on_path(_path, field_, nbox, tuning)
    return NBoxColor(
        nbox=nbox,
        black=black,
        white=white,
        good=good,
        speed_violation=speed_v,
        cap_violation=cap_v,
        crossing=crossing,
        heavy_window=window,
    )


def _window_on_path(path, field_: WeightField, nbox: NBox, tuning: NBoxTuning):
    from .lattice import edge_between

    thr = field_.heavy_threshold(tuning.alpha2)
    m = tuning.window_len
    run = 0
    for i, (a, b) in enumerate(zip(path, path[1:])):
        if field_.weight_of(edge_between(a, b)) >= thr and nbox.in_b(a) and nbox.in_b(b):
            run += 1
            if run >= m:
                return (i - m + 1, i + 1)
        else:
            run = 0
    return None


def boxes_meeting_path(
    path, n: int, dimension: int, box_radius: int
) -> list[NBox]:
    """All n-boxes (every direction and block) whose slab B meets the path
    and stays inside the field box."""
    out = set()
    for v in path:
        for jsign in (1, -1):
            for axis in range(dimension):
                j = jsign * (axis + 1)
                ranges = []
                for i, c in enumerate(v):
                    if i == axis:
                        if jsign > 0:
                            ls = range(-(-c // n) - 2, c // n - 1 + 1)
                        else:
                            ls = range(-(-c // n), c // n + 1 + 1)
                    else:
                        ls = range(-(-(c - 2 * n) // n), (c + n) // n + 1)
                    ranges.append(list(ls))
                for l in product(*ranges):
                    nb = NBox(tuple(l), n, j)
                    if nb.in_b(v):
                        bb = nb.b_bounds()
                        if all(lo >= -box_radius and hi <= box_radius for lo, hi in bb):
                            out.add(nb)
    return sorted(out, key=lambda nb: (nb.direction, nb.block))


@dataclass(frozen=True)
class GrayCountReport:
    source: Coord
    target: Coord
    n: int
    boxes_meeting_path: int
    white_boxes: int
    gray_count: int
    gray_boxes: tuple[NBox, ...]


def count_gray(
    field_: WeightField,
    source: Coord,
    target: Coord,
    n: int,
    tuning: NBoxTuning,
) -> GrayCountReport:
    """Count distinct gray n-boxes along the unique optimal path.

    Requires a unique geodesic.  Boxes the path does not cross are not gray
    by definition, so the (expensive) weight-regularity check only runs for
    crossed boxes.
    """
    box = field_.box
    ptf = shortest_paths(field_, source)
    dag = build_geodesic_dag(ptf, field_)
    path = _unique_path_or_raise(dag, target)
    candidates = boxes_meeting_path(path, n, box.dimension, box.radius)
    white = [nb for nb in candidates if _path_crossing(path, nb) is not None]
    gray = []
    for nb in white:
        black, _, _ = _black_check(field_, nb, tuning)
        if black:
            gray.append(nb)
    return GrayCountReport(
        source=source,
        target=target,
        n=n,
        boxes_meeting_path=len(candidates),
        white_boxes=len(white),
        gray_count=len(gray),
        gray_boxes=tuple(gray),
    )
