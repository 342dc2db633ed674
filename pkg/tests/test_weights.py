import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fpplab import lattice, weights
from fpplab.weights import (
    DistributionSpec,
    PercolationThresholds,
    ResampleSpec,
    resample,
    sample_field,
    usefulness_check,
)


class TestUsefulness:
    def test_continuous_is_useful(self):
        # continuous law: no atom at the support minimum
        rep = usefulness_check(
            DistributionSpec.uniform(0, 1), PercolationThresholds.defaults(2)
        )
        assert rep.useful

    def test_bernoulli_atom_at_zero(self):
        thr = PercolationThresholds(2, 0.5, 0.6)
        rep = usefulness_check(DistributionSpec.bernoulli(0.0, 1.0, 0.6), thr)
        assert not rep.useful
        assert "p_c" in rep.explanation

    def test_point_mass_positive(self):
        thr = PercolationThresholds(2, 0.5, 0.6)
        rep = usefulness_check(DistributionSpec.point_mass(1.0), thr)
        assert not rep.useful
        assert "vec_p_c" in rep.explanation


class TestSampling:
    def test_point_mass_all_ones(self, box2_r2, unit_dist):
        f = sample_field(box2_r2, unit_dist, mode="exact", master_seed=3, grid_log2=10)
        assert np.all(f.values == 1 << 10)

    def test_determinism(self, box2_r2, exp_dist):
        f1 = sample_field(box2_r2, exp_dist, mode="float", master_seed=11)
        f2 = sample_field(box2_r2, exp_dist, mode="float", master_seed=11)
        assert np.array_equal(f1.values, f2.values)
        f3 = sample_field(box2_r2, exp_dist, mode="float", master_seed=12)
        assert not np.array_equal(f1.values, f3.values)

    def test_exponential_mean_within_3se(self, exp_dist):
        box = lattice.build_box(2, 112)  # > 1e5 edges
        f = sample_field(box, exp_dist, mode="float", master_seed=5)
        n = f.values.size
        assert n >= 10**5
        se = 1.0 / math.sqrt(n)
        assert abs(f.values.mean() - 1.0) < 3 * se

    def test_exact_grid_values_are_integers(self, box2_r2, uniform_dist):
        f = sample_field(box2_r2, uniform_dist, mode="exact", master_seed=1)
        assert f.values.dtype == np.int64
        assert f.values.min() >= 0
        assert f.values.max() < 1 << 40

    def test_finite_table_atoms_on_grid(self, box2_r2):
        d = DistributionSpec.finite_table([0.5, 1.0, 2.0], [0.25, 0.5, 0.25])
        f = sample_field(box2_r2, d, mode="exact", master_seed=2, grid_log2=8)
        assert set(np.unique(f.values)) <= {128, 256, 512}

    def test_float_no_collisions_radius20(self, uniform_dist, exp_dist):
        # continuous float weights should never collide at this scale
        box = lattice.build_box(2, 20)
        for seed in range(5):
            for dist in (uniform_dist, exp_dist):
                f = sample_field(box, dist, mode="float", master_seed=seed)
                assert np.unique(f.values).size == f.values.size


class TestResample:
    def test_single_edge_differs_only_there(self, box2_r2, uniform_dist):
        f = sample_field(box2_r2, uniform_dist, mode="exact", master_seed=7)
        e = box2_r2.edge(13)
        f2 = resample(f, ResampleSpec(frozenset([e]), resample_seed=5))
        diff = np.nonzero(f.values != f2.values)[0]
        assert list(diff) == [13]
        assert f.generation == 0 and f2.generation == 1

    def test_determinism(self, box2_r2, uniform_dist):
        f = sample_field(box2_r2, uniform_dist, mode="exact", master_seed=7)
        spec = ResampleSpec(frozenset([box2_r2.edge(3)]), resample_seed=5)
        assert np.array_equal(resample(f, spec).values, resample(f, spec).values)

    @given(st.integers(0, 39), st.integers(0, 39), st.integers(0, 2**32))
    @settings(max_examples=25, deadline=None)
    def test_disjoint_resamples_commute(self, e1, e2, seed):
        box = lattice.build_box(2, 2)
        if e1 == e2:
            return
        f = sample_field(box, DistributionSpec.uniform(0, 1), mode="exact", master_seed=seed)
        s1 = ResampleSpec(frozenset([box.edge(e1)]), resample_seed=1)
        s2 = ResampleSpec(frozenset([box.edge(e2)]), resample_seed=2)
        ab = resample(resample(f, s1), s2)
        ba = resample(resample(f, s2), s1)
        assert np.array_equal(ab.values, ba.values)

    def test_acceptance_predicate(self, box2_r2, exp_dist):
        f = sample_field(box2_r2, exp_dist, mode="exact", master_seed=9)
        e = box2_r2.edge(0)
        f2 = resample(f, ResampleSpec(frozenset([e]), 4, accept=("<", 0.5)))
        assert f2.values[0] < weights.threshold_to_grid(0.5, f.grid_log2)
        f3 = resample(f, ResampleSpec(frozenset([e]), 4, accept=(">=", 2.0)))
        assert f3.values[0] >= weights.threshold_to_grid(2.0, f.grid_log2)

    def test_acceptance_zero_mass_exhausts(self, box2_r2, unit_dist):
        f = sample_field(box2_r2, unit_dist, mode="exact", master_seed=9, grid_log2=8)
        e = box2_r2.edge(0)
        old_budget = weights.RESAMPLE_RETRY_BUDGET
        weights.RESAMPLE_RETRY_BUDGET = 50
        try:
            with pytest.raises(RuntimeError):
                resample(f, ResampleSpec(frozenset([e]), 4, accept=("<", 0.5)))
        finally:
            weights.RESAMPLE_RETRY_BUDGET = old_budget

    def test_resampled_distribution_gof(self, uniform_dist):
        # fresh draws across 10^4 distinct resample seeds follow the law
        box = lattice.build_box(2, 1)
        f = sample_field(box, uniform_dist, mode="float", master_seed=1)
        e = box.edge(0)
        vals = [
            float(resample(f, ResampleSpec(frozenset([e]), seed)).values[0])
            for seed in range(10_000)
        ]
        ks = stats.kstest(vals, "uniform")
        assert ks.pvalue > 1e-3


def test_distribution_json_roundtrip():
    for d in (
        DistributionSpec.point_mass(2.0),
        DistributionSpec.bernoulli(0.0, 1.0, 0.3),
        DistributionSpec.finite_table([0.5, 1.0], [0.4, 0.6]),
        DistributionSpec.uniform(0.0, 2.0),
        DistributionSpec.exponential(1.5),
        DistributionSpec.shifted_exponential(0.5, 1.0),
    ):
        assert DistributionSpec.from_json(d.to_json()) == d


def test_grid_threshold_helpers():
    assert weights.value_to_grid(1.0, 8) == 256
    assert weights.threshold_to_grid(1.0, 8) == 256
    # 0.3 is not dyadic: floor vs ceil differ by one
    assert weights.threshold_to_grid(0.3, 8) == weights.value_to_grid(0.3, 8) + 1


def test_scalar_quantile_matches_vectorised():
    # the scalar twin backs the lazy samplers and must agree bit-for-bit
    us = np.random.default_rng(3).random(20_000)
    for d in (
        DistributionSpec.exponential(1.0),
        DistributionSpec.uniform(0.25, 1.5),
        DistributionSpec.shifted_exponential(0.5, 2.0),
        DistributionSpec.bernoulli(0, 1, 0.3),
        DistributionSpec.point_mass(2.0),
    ):
        sq = d.scalar_quantile()
        assert np.array_equal(d.quantile(us), np.array([sq(float(u)) for u in us]))


def test_atom_at_f_plus():
    assert DistributionSpec.point_mass(1.0).atom_at_f_plus == 1.0
    assert DistributionSpec.bernoulli(0, 1, 0.3).atom_at_f_plus == pytest.approx(0.7)
    assert DistributionSpec.finite_table([1, 2], [0.6, 0.4]).atom_at_f_plus == 0.4
    assert DistributionSpec.exponential(1.0).atom_at_f_plus == 0.0
