"""Integer-lattice geometry: boxes, edges, boundaries, and the two metrics.

Vertices are points of Z^d (d >= 2); edges are non-oriented nearest-neighbour
pairs.  All computations live inside an origin-centred cube [-r, r]^d with
dense integer ids for vertices and edges, which keeps field storage and graph
algorithms array-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

Coord = tuple[int, ...]


class Edge(NamedTuple):
    """Non-oriented nearest-neighbour edge, stored with endpoints sorted."""

    a: Coord
    b: Coord


def l1_distance(x: Coord, y: Coord) -> int:
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return sum(abs(xi - yi) for xi, yi in zip(x, y))


def linf_distance(x: Coord, y: Coord) -> int:
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return max(abs(xi - yi) for xi, yi in zip(x, y))


def lattice_metrics(x: Coord, y: Coord) -> tuple[int, int]:
    """Return (l1, linf) distances between two lattice points."""
    return l1_distance(x, y), linf_distance(x, y)


def edge_between(a: Coord, b: Coord) -> Edge:
    """Canonical edge between two adjacent vertices; order-insensitive."""
    if l1_distance(a, b) != 1:
        raise ValueError(f"{a} and {b} are not nearest neighbours")
    return Edge(a, b) if a <= b else Edge(b, a)


def unit_neighbors(v: Coord) -> list[Coord]:
    out = []
    for i in range(len(v)):
        for s in (-1, 1):
            w = list(v)
            w[i] += s
            out.append(tuple(w))
    return out


@dataclass(frozen=True)
class BoxRegion:
    """Origin-centred cube [-radius, radius]^d with dense index tables.

    Vertex ids are row-major over coordinates shifted by +radius.  Edge ids
    are grouped by axis; within an axis they follow the vertex id of the lower
    endpoint.  Both tables are bijections onto [0, count).
    """

    dimension: int
    radius: int
    # index machinery, built once in build_box
    _side: int = field(repr=False, default=0)
    _strides: np.ndarray = field(repr=False, default=None)
    _edge_u: np.ndarray = field(repr=False, default=None)
    _edge_v: np.ndarray = field(repr=False, default=None)
    _edge_axis: np.ndarray = field(repr=False, default=None)
    _edge_table: np.ndarray = field(repr=False, default=None)
    _inc_indptr: np.ndarray = field(repr=False, default=None)
    _inc_vertex: np.ndarray = field(repr=False, default=None)
    _inc_edge: np.ndarray = field(repr=False, default=None)

    @property
    def n_vertices(self) -> int:
        return self._side**self.dimension

    @property
    def n_edges(self) -> int:
        return int(self._edge_u.shape[0])

    # -- vertex indexing ---------------------------------------------------

    def contains(self, v: Coord) -> bool:
        return len(v) == self.dimension and all(abs(c) <= self.radius for c in v)

    def vertex_id(self, v: Coord) -> int:
        if not self.contains(v):
            raise KeyError(f"{v} outside box radius {self.radius}")
        vid = 0
        for c in v:
            vid = vid * self._side + (c + self.radius)
        return vid

    def coord(self, vid: int) -> Coord:
        if not 0 <= vid < self.n_vertices:
            raise KeyError(f"vertex id {vid} out of range")
        out = []
        for _ in range(self.dimension):
            out.append(vid % self._side - self.radius)
            vid //= self._side
        return tuple(reversed(out))

    def vertex_ids_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised vertex_id for an (n, d) int array (no bounds check)."""
        return (coords + self.radius) @ self._strides

    def all_coords(self) -> np.ndarray:
        """(n_vertices, d) array of coordinates in vertex-id order."""
        grids = np.meshgrid(
            *[np.arange(-self.radius, self.radius + 1)] * self.dimension,
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)

    # -- edge indexing -----------------------------------------------------

    def edge_id(self, e: Edge) -> int:
        ua, ub = self.vertex_id(e.a), self.vertex_id(e.b)
        u = min(ua, ub)
        axis = next(i for i in range(self.dimension) if e.a[i] != e.b[i])
        eid = int(self._edge_table[u, axis])
        if eid < 0:
            raise KeyError(f"{e} not an edge of this box")
        return eid

    def edge(self, eid: int) -> Edge:
        if not 0 <= eid < self.n_edges:
            raise KeyError(f"edge id {eid} out of range")
        return edge_between(
            self.coord(int(self._edge_u[eid])), self.coord(int(self._edge_v[eid]))
        )

    @property
    def edge_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Vertex-id arrays (u, v) of each edge; u is the lower endpoint."""
        return self._edge_u, self._edge_v

    @property
    def edge_axes(self) -> np.ndarray:
        return self._edge_axis

    @property
    def incidence(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR-style (indptr, neighbour vertex, edge id) per vertex."""
        return self._inc_indptr, self._inc_vertex, self._inc_edge

    # -- boundaries ----------------------------------------------------------

    def boundary_vertex_ids(self) -> np.ndarray:
        """Ids of vertices with |v|_inf = radius (the box horizon)."""
        coords = self.all_coords()
        mask = np.abs(coords).max(axis=1) == self.radius
        return np.nonzero(mask)[0]


class BoundarySet(NamedTuple):
    """Outer boundary of a region: all of it, plus the part leaving the box."""

    vertices: frozenset[Coord]
    outside_box: frozenset[Coord]


@lru_cache(maxsize=64)
def build_box(dimension: int, radius: int) -> BoxRegion:
    """Construct the index tables for [-radius, radius]^d (cached; immutable)."""
    if dimension < 2:
        raise ValueError("dimension must be >= 2")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    side = 2 * radius + 1
    n = side**dimension
    strides = np.array([side**i for i in range(dimension - 1, -1, -1)], dtype=np.int64)

    # edges grouped by axis: low endpoint ranges over the box minus its top
    # slice along that axis
    edge_u_parts, edge_v_parts, axis_parts = [], [], []
    coords = None
    if radius > 0:
        grids = np.meshgrid(
            *[np.arange(-radius, radius + 1)] * dimension, indexing="ij"
        )
        coords = np.stack([g.ravel() for g in grids], axis=1)
        vids = (coords + radius) @ strides
        for axis in range(dimension):
            low = coords[:, axis] < radius
            u = vids[low]
            edge_u_parts.append(u)
            edge_v_parts.append(u + strides[axis])
            axis_parts.append(np.full(u.shape[0], axis, dtype=np.int64))
    if edge_u_parts:
        edge_u = np.concatenate(edge_u_parts)
        edge_v = np.concatenate(edge_v_parts)
        edge_axis = np.concatenate(axis_parts)
    else:
        edge_u = np.empty(0, dtype=np.int64)
        edge_v = np.empty(0, dtype=np.int64)
        edge_axis = np.empty(0, dtype=np.int64)

    edge_table = np.full((n, dimension), -1, dtype=np.int64)
    edge_table[edge_u, edge_axis] = np.arange(edge_u.shape[0], dtype=np.int64)

    # vertex incidence in CSR form (both edge orientations)
    m = edge_u.shape[0]
    ends = np.concatenate([edge_u, edge_v])
    others = np.concatenate([edge_v, edge_u])
    eids = np.concatenate([np.arange(m, dtype=np.int64)] * 2) if m else np.empty(0, np.int64)
    order = np.argsort(ends, kind="stable")
    inc_vertex = others[order]
    inc_edge = eids[order]
    inc_indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(inc_indptr, ends + 1, 1)
    np.cumsum(inc_indptr, out=inc_indptr)

    return BoxRegion(
        dimension=dimension,
        radius=radius,
        _side=side,
        _strides=strides,
        _edge_u=edge_u,
        _edge_v=edge_v,
        _edge_axis=edge_axis,
        _edge_table=edge_table,
        _inc_indptr=inc_indptr,
        _inc_vertex=inc_vertex,
        _inc_edge=inc_edge,
    )


def outer_boundary(region: Iterable[Coord], box: BoxRegion) -> BoundarySet:
    """Vertices adjacent to the region but not in it.

    The boundary is taken in the ambient lattice, so it may contain vertices
    outside the box; those are reported separately in ``outside_box``.
    """
    region = set(region)
    for v in region:
        if not box.contains(v):
            raise ValueError(f"region vertex {v} outside box")
    out: set[Coord] = set()
    for v in region:
        for w in unit_neighbors(v):
            if w not in region:
                out.add(w)
    outside = frozenset(w for w in out if not box.contains(w))
    return BoundarySet(frozenset(out), outside)
