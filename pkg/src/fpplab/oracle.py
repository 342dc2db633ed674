"""Brute-force ground truth on tiny boxes.

Exhaustively enumerates self-avoiding paths between two vertices with exact
arithmetic (integers in exact mode, Fractions of the float bit patterns in
float mode) and derives every quantity the fast modules compute: passage
time, the full optimal-path set, counts, extremal lengths, minimal heavy-edge
counts, and bad-vertex answers.  Non-negative weights make the self-avoiding
restriction safe: revisiting a vertex can never improve a path, it can only
duplicate one.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .lattice import Coord, edge_between, l1_distance, unit_neighbors
from .weights import WeightField

_RADIUS_LIMIT = 3


def load_fixture_file(text: str):
    """Parse a plain-text fixture: box shape, per-edge exact weights, and the
    expected enumeration results recorded alongside.

    Returns (dimension, radius, grid_log2, edge_weights, expected) where
    edge_weights maps Edge -> numerator and expected is a list of dicts with
    keys a, b, time, count, min_len, max_len, paths.
    """
    from .lattice import edge_between

    dimension = radius = grid_log2 = None
    edge_weights = {}
    expected = []

    def coord(tok: str) -> tuple:
        return tuple(int(x) for x in tok.split(","))

    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "dimension":
            dimension = int(parts[1])
        elif parts[0] == "radius":
            radius = int(parts[1])
        elif parts[0] == "grid_log2":
            grid_log2 = int(parts[1])
        elif parts[0] == "edge":
            edge_weights[edge_between(coord(parts[1]), coord(parts[2]))] = int(parts[3])
        elif parts[0] == "pair":
            expected.append(
                {
                    "a": coord(parts[1]),
                    "b": coord(parts[2]),
                    "time": int(parts[3]),
                    "count": int(parts[4]),
                    "min_len": int(parts[5]),
                    "max_len": int(parts[6]),
                    "paths": [],
                }
            )
        elif parts[0] == "path":
            expected[-1]["paths"].append(
                tuple(coord(tok) for tok in parts[1].split("|"))
            )
        else:
            raise ValueError(f"unknown fixture line: {line}")
    if dimension is None or radius is None or grid_log2 is None:
        raise ValueError("fixture missing dimension/radius/grid_log2")
    return dimension, radius, grid_log2, edge_weights, expected


@dataclass(frozen=True)
class EnumerationResult:
    """Everything the enumeration learned about one vertex pair."""

    a: Coord
    b: Coord
    time: object  # int (exact mode) or Fraction (float mode)
    paths: tuple[tuple[Coord, ...], ...]
    partial: bool  # a length-capped branch might have hidden an optimal path

    @property
    def count(self) -> int:
        return len(self.paths)

    @property
    def min_len(self) -> int:
        return min(len(p) - 1 for p in self.paths)

    @property
    def max_len(self) -> int:
        return max(len(p) - 1 for p in self.paths)

    def min_heavy(self, field_: WeightField, threshold) -> int:
        best = None
        for p in self.paths:
            c = sum(
                1
                for x, y in zip(p, p[1:])
                if field_.weight_of(edge_between(x, y)) >= threshold
            )
            best = c if best is None else min(best, c)
        return best

    def path_set(self) -> frozenset[tuple[Coord, ...]]:
        return frozenset(self.paths)

    def exists_avoiding(self, forbidden: set[Coord]) -> tuple[bool, tuple | None]:
        """Is some optimal path disjoint from ``forbidden``? With witness."""
        for p in self.paths:
            if not forbidden.intersection(p):
                return True, p
        return False, None

    def is_bad_vertex(self, ray_vertices: tuple[Coord, ...]) -> bool:
        """Does some optimal a->b path meet the ray only at b?"""
        rv = set(ray_vertices)
        rv.discard(self.b)
        ok, _ = self.exists_avoiding(rv)
        return ok


def brute_force(
    field_: WeightField,
    a: Coord,
    b: Coord,
    length_cap: int,
    allow_large: bool = False,
) -> EnumerationResult:
    """Enumerate all self-avoiding optimal paths a->b up to ``length_cap`` edges.

    ``partial`` is set when a branch was cut by the cap while still at or
    below the final optimum, i.e. when the cap could have hidden an optimal
    path.  Callers that need completeness assert ``not partial``.
    """
    box = field_.box
    if box.radius > _RADIUS_LIMIT and not allow_large:
        raise ValueError(
            f"brute force limited to radius <= {_RADIUS_LIMIT}; pass allow_large to override"
        )
    if not (box.contains(a) and box.contains(b)):
        raise ValueError("pair outside box")
    if length_cap < l1_distance(a, b):
        raise ValueError("length cap below l1 distance")

    if field_.is_exact:
        wt = {box.edge(i): int(field_.values[i]) for i in range(box.n_edges)}
    else:
        wt = {box.edge(i): Fraction(float(field_.values[i])) for i in range(box.n_edges)}

    best: list = [None]
    found: dict = {}
    capped_at_or_below_best = [False]
    cap_cut_weights: list = []

    path = [a]
    on_path = {a}

    def rec(v: Coord, weight):
        if best[0] is not None and weight > best[0]:
            return
        if v == b:
            if best[0] is None or weight < best[0]:
                best[0] = weight
                found.clear()
            if weight == best[0]:
                found[tuple(path)] = True
            return  # self-avoidance: no later return to b is possible
        if len(path) - 1 >= length_cap:
            cap_cut_weights.append(weight)
            return
        for wv in unit_neighbors(v):
            if wv in on_path or not box.contains(wv):
                continue
            e = edge_between(v, wv)
            nw = weight + wt[e]
            path.append(wv)
            on_path.add(wv)
            rec(wv, nw)
            on_path.discard(wv)
            path.pop()

    rec(a, 0)
    if best[0] is None:
        raise ValueError("no path within cap")
    partial = any(w <= best[0] for w in cap_cut_weights)
    return EnumerationResult(
        a=a, b=b, time=best[0], paths=tuple(sorted(found)), partial=partial
    )
