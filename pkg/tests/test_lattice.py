import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpplab.lattice import (
    build_box,
    edge_between,
    lattice_metrics,
    outer_boundary,
)


def test_box_counts():
    box = build_box(2, 2)
    assert (box.n_vertices, box.n_edges) == (25, 40)
    box = build_box(3, 1)
    assert (box.n_vertices, box.n_edges) == (27, 54)
    box = build_box(2, 0)
    assert (box.n_vertices, box.n_edges) == (1, 0)


def test_box_rejects_low_dimension():
    with pytest.raises(ValueError):
        build_box(1, 3)


def test_metrics_examples():
    assert lattice_metrics((0, 0), (3, -2)) == (5, 3)
    assert lattice_metrics((1, 1), (1, 1)) == (0, 0)
    assert lattice_metrics((-2, 4), (1, 0)) == (7, 4)


def test_metrics_dimension_mismatch():
    with pytest.raises(ValueError):
        lattice_metrics((0, 0), (1, 2, 3))


def test_outer_boundary_examples(box2_r2):
    b = outer_boundary({(0, 0)}, box2_r2)
    assert b.vertices == frozenset({(1, 0), (-1, 0), (0, 1), (0, -1)})
    b = outer_boundary({(0, 0), (1, 0)}, box2_r2)
    assert len(b.vertices) == 6
    square = {(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)}
    b = outer_boundary(square, box2_r2)
    assert len(b.vertices) == 12


def test_outer_boundary_may_leave_box(box2_r1):
    b = outer_boundary({(1, 0)}, box2_r1)
    assert (2, 0) in b.vertices
    assert b.outside_box == frozenset({(2, 0)})


@given(st.sets(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=8))
def test_outer_boundary_disjoint(region):
    box = build_box(2, 2)
    b = outer_boundary(region, box)
    assert not (b.vertices & region)


@given(
    st.lists(st.integers(-50, 50), min_size=2, max_size=4),
    st.lists(st.integers(-50, 50), min_size=2, max_size=4),
)
def test_metric_inequalities(x, y):
    if len(x) != len(y):
        x = x[: min(len(x), len(y))]
        y = y[: len(x)]
    l1, linf = lattice_metrics(tuple(x), tuple(y))
    assert linf <= l1 <= len(x) * linf


def test_edge_canonicalisation():
    assert edge_between((0, 0), (1, 0)) == edge_between((1, 0), (0, 0))
    with pytest.raises(ValueError):
        edge_between((0, 0), (1, 1))


@given(st.integers(2, 3), st.integers(0, 3))
@settings(max_examples=20)
def test_index_round_trips(dim, radius):
    box = build_box(dim, radius)
    for vid in range(box.n_vertices):
        assert box.vertex_id(box.coord(vid)) == vid
    for eid in range(box.n_edges):
        assert box.edge_id(box.edge(eid)) == eid


def test_boundary_vertices(box2_r2):
    ids = box2_r2.boundary_vertex_ids()
    assert len(ids) == 16  # perimeter of the 5x5 square
    for vid in ids:
        assert max(abs(c) for c in box2_r2.coord(int(vid))) == 2


def test_edge_count_matches_formula():
    for dim, radius in ((2, 3), (3, 2), (2, 5)):
        box = build_box(dim, radius)
        side = 2 * radius + 1
        assert box.n_edges == dim * side ** (dim - 1) * (side - 1)
