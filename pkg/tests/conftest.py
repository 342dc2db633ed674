import pytest

from fpplab import lattice, weights
from fpplab.weights import DistributionSpec


@pytest.fixture(scope="session")
def box2_r1():
    return lattice.build_box(2, 1)


@pytest.fixture(scope="session")
def box2_r2():
    return lattice.build_box(2, 2)


@pytest.fixture(scope="session")
def box2_r3():
    return lattice.build_box(2, 3)


@pytest.fixture(scope="session")
def unit_dist():
    return DistributionSpec.point_mass(1.0)


@pytest.fixture(scope="session")
def uniform_dist():
    return DistributionSpec.uniform(0.0, 1.0)


@pytest.fixture(scope="session")
def exp_dist():
    return DistributionSpec.exponential(1.0)


def make_explicit_field(box, edge_values: dict, default: float = 1.0, grid_log2: int = 8):
    """Exact field with hand-picked edge weights (value units)."""
    f = weights.sample_field(
        box, DistributionSpec.point_mass(default), mode="exact",
        master_seed=0, grid_log2=grid_log2,
    )
    values = f.values.copy()
    for (a, b), w in edge_values.items():
        values[box.edge_id(lattice.edge_between(a, b))] = weights.value_to_grid(w, grid_log2)
    import dataclasses

    return dataclasses.replace(f, values=values)


@pytest.fixture
def explicit_field():
    return make_explicit_field
