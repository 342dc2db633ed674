"""Edge-weight distributions, seeded field sampling, and resampling operators.

A weight field assigns one i.i.d. draw to every edge of a box.  Fields come in
two numeric modes:

* ``exact``: weights are non-negative integers on a dyadic grid of resolution
  2**grid_log2, interpreted as numerator / 2**grid_log2.  Every passage-time
  comparison downstream is then an exact integer comparison, which removes tie
  ambiguity from the uniqueness-sensitive definitions.  Continuous
  distributions are discretised onto the grid (floor), a documented
  approximation.
* ``float``: IEEE double draws; ties are measure-zero and guarded by a small
  tolerance downstream.

Each edge value is a pure function of (master_seed, edge id, per-edge resample
counter, per-edge stream salt), so resampling disjoint edge sets commutes and
whole experiments replay bit-identically from their seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import _rng
from .lattice import BoxRegion, Edge

DEFAULT_GRID_LOG2 = 40
RESAMPLE_RETRY_BUDGET = 10**6

_KINDS = (
    "point-mass",
    "bernoulli-two-point",
    "finite-table",
    "uniform-interval",
    "exponential",
    "shifted-exponential",
)


@dataclass(frozen=True)
class DistributionSpec:
    """One edge-weight law with its support data.

    ``f_minus``/``f_plus`` are the infimum and supremum of the support
    (``f_plus`` may be ``inf``); ``atom_at_f_minus`` is the mass sitting on
    the infimum, which is what the usefulness predicate inspects.
    """

    kind: str
    params: tuple[float, ...]
    f_minus: float
    f_plus: float
    atom_at_f_minus: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.f_minus < 0:
            raise ValueError("support must be non-negative")
        if self.f_minus > self.f_plus:
            raise ValueError("f_minus exceeds f_plus")
        if not 0.0 <= self.atom_at_f_minus <= 1.0:
            raise ValueError("atom mass must lie in [0, 1]")

    @property
    def is_continuous(self) -> bool:
        return self.kind in ("uniform-interval", "exponential", "shifted-exponential")

    @property
    def atom_at_f_plus(self) -> float:
        """Mass on the support supremum (0 for continuous or unbounded kinds)."""
        if self.kind == "point-mass":
            return 1.0
        if self.kind == "bernoulli-two-point":
            return 1.0 - self.params[2]
        if self.kind == "finite-table":
            return self.params[-1]  # values sorted ascending, probs aligned
        return 0.0

    # -- constructors --------------------------------------------------------

    @staticmethod
    def point_mass(value: float) -> "DistributionSpec":
        if value < 0:
            raise ValueError("value must be >= 0")
        return DistributionSpec("point-mass", (value,), value, value, 1.0)

    @staticmethod
    def bernoulli(lo: float, hi: float, p_lo: float) -> "DistributionSpec":
        if not 0 <= lo < hi:
            raise ValueError("need 0 <= lo < hi")
        if not 0.0 < p_lo < 1.0:
            raise ValueError("p_lo must be in (0, 1)")
        return DistributionSpec("bernoulli-two-point", (lo, hi, p_lo), lo, hi, p_lo)

    @staticmethod
    def finite_table(values: Iterable[float], probs: Iterable[float]) -> "DistributionSpec":
        vals = tuple(float(v) for v in values)
        ps = tuple(float(p) for p in probs)
        if len(vals) != len(ps) or not vals:
            raise ValueError("values and probs must be equal-length and non-empty")
        if any(v < 0 for v in vals) or any(p < 0 for p in ps):
            raise ValueError("values and probs must be non-negative")
        if abs(sum(ps) - 1.0) > 1e-12:
            raise ValueError("probs must sum to 1")
        order = sorted(range(len(vals)), key=lambda i: vals[i])
        vals = tuple(vals[i] for i in order)
        ps = tuple(ps[i] for i in order)
        return DistributionSpec(
            "finite-table", vals + ps, vals[0], vals[-1], ps[0]
        )

    @staticmethod
    def uniform(lo: float, hi: float) -> "DistributionSpec":
        if not 0 <= lo < hi:
            raise ValueError("need 0 <= lo < hi")
        return DistributionSpec("uniform-interval", (lo, hi), lo, hi, 0.0)

    @staticmethod
    def exponential(mean: float) -> "DistributionSpec":
        if mean <= 0:
            raise ValueError("mean must be > 0")
        return DistributionSpec("exponential", (mean,), 0.0, math.inf, 0.0)

    @staticmethod
    def shifted_exponential(shift: float, mean: float) -> "DistributionSpec":
        if shift < 0 or mean <= 0:
            raise ValueError("need shift >= 0 and mean > 0")
        return DistributionSpec(
            "shifted-exponential", (shift, mean), shift, math.inf, 0.0
        )

    # -- transforms ------------------------------------------------------------

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF applied to uniforms in [0, 1), vectorised."""
        u = np.asarray(u, dtype=np.float64)
        k = self.kind
        if k == "point-mass":
            return np.full_like(u, self.params[0])
        if k == "bernoulli-two-point":
            lo, hi, p = self.params
            return np.where(u < p, lo, hi)
        if k == "finite-table":
            m = len(self.params) // 2
            vals = np.asarray(self.params[:m])
            cum = np.cumsum(np.asarray(self.params[m:]))
            idx = np.searchsorted(cum, u, side="right")
            return vals[np.minimum(idx, m - 1)]
        if k == "uniform-interval":
            lo, hi = self.params
            return lo + u * (hi - lo)
        if k == "exponential":
            (mean,) = self.params
            return -mean * np.log1p(-u)
        if k == "shifted-exponential":
            shift, mean = self.params
            return shift - mean * np.log1p(-u)
        raise AssertionError(k)

    def scalar_quantile(self) -> Callable[[float], float]:
        """Scalar python-float twin of ``quantile`` for tight loops.

        Bit-identical to the vectorised transform (both defer to libm);
        asserted by tests against the array path.
        """
        k = self.kind
        if k == "point-mass":
            value = self.params[0]
            return lambda u: value
        if k == "bernoulli-two-point":
            lo, hi, p = self.params
            return lambda u: lo if u < p else hi
        if k == "uniform-interval":
            lo, hi = self.params
            span = hi - lo
            return lambda u: lo + u * span
        # np.log1p, not math.log1p: numpy's SIMD kernel differs from libm by
        # one ulp on some inputs, and the twin must stay bit-identical
        if k == "exponential":
            (mean,) = self.params
            log1p = np.log1p
            return lambda u: -mean * float(log1p(-u))
        if k == "shifted-exponential":
            shift, mean = self.params
            log1p = np.log1p
            return lambda u: shift - mean * float(log1p(-u))
        quantile = self.quantile
        return lambda u: float(quantile(u))

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @staticmethod
    def from_json(obj: dict) -> "DistributionSpec":
        kind = obj["kind"]
        params = [float(p) for p in obj["params"]]
        ctor = {
            "point-mass": DistributionSpec.point_mass,
            "bernoulli-two-point": DistributionSpec.bernoulli,
            "uniform-interval": DistributionSpec.uniform,
            "exponential": DistributionSpec.exponential,
            "shifted-exponential": DistributionSpec.shifted_exponential,
        }
        if kind == "finite-table":
            m = len(params) // 2
            return DistributionSpec.finite_table(params[:m], params[m:])
        if kind not in ctor:
            raise ValueError(f"unknown distribution kind {kind!r}")
        return ctor[kind](*params)


# Shipped threshold defaults.  p_c(2) = 1/2 is exact; every other number is an
# external numerical estimate from the percolation literature, configuration
# rather than derived content, and can be overridden per experiment.
_PC_DEFAULTS = {2: 0.5, 3: 0.2488126}
_VEC_PC_DEFAULTS = {2: 0.644701, 3: 0.382223}


@dataclass(frozen=True)
class PercolationThresholds:
    """Critical probabilities used by the usefulness predicate."""

    dimension: int
    p_c: float
    vec_p_c: float
    note: str = ""

    def __post_init__(self):
        if not 0.0 < self.p_c <= self.vec_p_c < 1.0:
            raise ValueError("need 0 < p_c <= vec_p_c < 1")

    @staticmethod
    def defaults(dimension: int) -> "PercolationThresholds":
        if dimension not in _PC_DEFAULTS:
            raise ValueError(
                f"no shipped thresholds for d={dimension}; construct explicitly"
            )
        note = "exact" if dimension == 2 else "numerical estimate"
        return PercolationThresholds(
            dimension, _PC_DEFAULTS[dimension], _VEC_PC_DEFAULTS[dimension], note
        )


@dataclass(frozen=True)
class UsefulnessReport:
    useful: bool
    explanation: str


def usefulness_check(
    dist: DistributionSpec, thresholds: PercolationThresholds
) -> UsefulnessReport:
    """Atom-at-minimum test: mass at the support infimum must stay below the
    (oriented, when the infimum is positive) percolation threshold."""
    if dist.f_minus == 0.0:
        bound, name = thresholds.p_c, "p_c"
    else:
        bound, name = thresholds.vec_p_c, "vec_p_c"
    useful = dist.atom_at_f_minus < bound
    verdict = "<" if useful else ">="
    return UsefulnessReport(
        useful,
        f"P(tau = {dist.f_minus}) = {dist.atom_at_f_minus} {verdict} "
        f"{name}({thresholds.dimension}) = {bound}",
    )


@dataclass(frozen=True)
class ResampleSpec:
    """Which edges get fresh draws, under which seed and acceptance rule.

    ``accept`` constrains the fresh values; draws are rejected and retried
    (bounded budget) until it holds.  It is given as (op, *bounds) with op in
    {"<", "<=", ">", ">=", "between"}; "between" takes closed bounds (lo, hi).
    """

    edges: frozenset[Edge]
    resample_seed: int
    accept: tuple | None = None

    def __post_init__(self):
        if not self.edges:
            raise ValueError("edge set must be non-empty")
        if self.accept is not None and self.accept[0] not in (
            "<", "<=", ">", ">=", "between",
        ):
            raise ValueError(f"unknown acceptance op {self.accept[0]!r}")


def value_to_grid(value: float, grid_log2: int) -> int:
    """Floor a real value onto the 2**-grid_log2 grid, exactly."""
    n = int(Fraction(value) * (1 << grid_log2))
    if n.bit_length() > 62:
        raise OverflowError(f"grid value for {value} exceeds 63 bits")
    return n


def threshold_to_grid(value: float, grid_log2: int) -> int:
    """Smallest grid numerator n with n/2**g >= value (for >= comparisons)."""
    f = Fraction(value) * (1 << grid_log2)
    n = f.numerator // f.denominator
    if n * f.denominator < f.numerator:
        n += 1
    return n


@dataclass(frozen=True)
class WeightField:
    """Immutable per-edge weights over a box.

    ``values`` is int64 numerators in exact mode, float64 in float mode.
    ``counters``/``salts`` record each edge's resampling history; together
    with ``master_seed`` and the edge id they determine the value.
    """

    box: BoxRegion
    dist: DistributionSpec
    mode: str
    master_seed: int
    values: np.ndarray = field(repr=False)
    counters: np.ndarray = field(repr=False)
    salts: np.ndarray = field(repr=False)
    grid_log2: int | None = None
    generation: int = 0

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact"

    def weight_of(self, e: Edge):
        """Weight of one edge in storage units (grid numerator or float)."""
        return self.values[self.box.edge_id(e)]

    def float_values(self) -> np.ndarray:
        """Weights as float64 in value units (lossy for exact mode reporting)."""
        if self.is_exact:
            return self.values.astype(np.float64) / float(1 << self.grid_log2)
        return self.values

    def heavy_threshold(self, value: float):
        """Convert a value-unit threshold into storage units for >= tests."""
        if self.is_exact:
            return threshold_to_grid(value, self.grid_log2)
        return value


def _draw(
    dist: DistributionSpec,
    mode: str,
    grid_log2: int | None,
    master_seed: int,
    edge_ids: np.ndarray,
    counters: np.ndarray,
    salts: np.ndarray,
) -> np.ndarray:
    u = _rng.uniform01(master_seed, edge_ids, counters, salts)
    vals = dist.quantile(u)
    if mode == "float":
        return np.asarray(vals, dtype=np.float64)
    scaled = np.floor(np.asarray(vals, dtype=np.float64) * float(1 << grid_log2))
    if scaled.size and scaled.max() >= float(1 << 62):
        raise OverflowError("exact-mode weight exceeds 63 bits after scaling")
    out = scaled.astype(np.int64)
    # atoms sitting exactly on the grid must land exactly, not via float floor
    if dist.kind in ("point-mass", "bernoulli-two-point", "finite-table"):
        m = len(dist.params) if dist.kind != "finite-table" else len(dist.params) // 2
        atom_values = dist.params[:1] if dist.kind == "point-mass" else (
            dist.params[:2] if dist.kind == "bernoulli-two-point" else dist.params[:m]
        )
        table = {float(v): value_to_grid(v, grid_log2) for v in atom_values}
        fixed = np.asarray(vals, dtype=np.float64)
        for v, n in table.items():
            out[fixed == v] = n
    return out


def sample_field(
    box: BoxRegion,
    dist: DistributionSpec,
    mode: str = "float",
    master_seed: int = 0,
    grid_log2: int | None = None,
) -> WeightField:
    """Draw an i.i.d. weight field; a pure function of its arguments."""
    if mode not in ("exact", "float"):
        raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
    if mode == "exact":
        grid_log2 = DEFAULT_GRID_LOG2 if grid_log2 is None else int(grid_log2)
    else:
        grid_log2 = None
    m = box.n_edges
    edge_ids = np.arange(m, dtype=np.uint64)
    counters = np.zeros(m, dtype=np.uint64)
    salts = np.zeros(m, dtype=np.uint64)
    values = _draw(dist, mode, grid_log2, master_seed, edge_ids, counters, salts)
    if values.size and values.min() < 0:
        raise ValueError("negative weight sampled")
    return WeightField(
        box=box,
        dist=dist,
        mode=mode,
        master_seed=master_seed,
        values=values,
        counters=counters,
        salts=salts,
        grid_log2=grid_log2,
    )


def _acceptance_fn(field_: WeightField, accept: tuple | None) -> Callable | None:
    if accept is None:
        return None
    op = accept[0]
    if op == "between":
        lo, hi = accept[1], accept[2]
        if field_.is_exact:
            g = field_.grid_log2
            lo, hi = threshold_to_grid(lo, g), value_to_grid(hi, g)
        return lambda v: (v >= lo) & (v <= hi)
    bound = accept[1]
    if field_.is_exact:
        g = field_.grid_log2
        # grid numerators: n/2^g >= x  <=>  n >= ceil(x*2^g); <= uses floor
        b_ge = threshold_to_grid(bound, g)
        b_le = value_to_grid(bound, g)
        return {
            "<": lambda v: v < b_ge,
            ">=": lambda v: v >= b_ge,
            "<=": lambda v: v <= b_le,
            ">": lambda v: v > b_le,
        }[op]
    return {
        "<": lambda v: v < bound,
        "<=": lambda v: v <= bound,
        ">": lambda v: v > bound,
        ">=": lambda v: v >= bound,
    }[op]


def resample(field_: WeightField, spec: ResampleSpec) -> WeightField:
    """Fresh independent draws on spec.edges, all other edges untouched.

    Deterministic in (field, spec).  Raises RuntimeError when the acceptance
    predicate rejects RESAMPLE_RETRY_BUDGET consecutive draws for some edge.
    """
    eids = np.array(sorted(field_.box.edge_id(e) for e in spec.edges), dtype=np.int64)
    values = field_.values.copy()
    counters = field_.counters.copy()
    salts = field_.salts.copy()
    counters[eids] += 1
    accept = _acceptance_fn(field_, spec.accept)

    pending = eids
    retry = 0
    while pending.size:
        if retry >= RESAMPLE_RETRY_BUDGET:
            raise RuntimeError(
                f"acceptance predicate rejected {retry} draws for edges {pending[:4]}"
            )
        salts[pending] = np.uint64(_rng.spawn_seed(spec.resample_seed, retry))
        fresh = _draw(
            field_.dist,
            field_.mode,
            field_.grid_log2,
            field_.master_seed,
            pending.astype(np.uint64),
            counters[pending],
            salts[pending],
        )
        if accept is None:
            values[pending] = fresh
            break
        ok = np.asarray(accept(fresh), dtype=bool)
        values[pending[ok]] = fresh[ok]
        pending = pending[~ok]
        retry += 1

    return replace(
        field_,
        values=values,
        counters=counters,
        salts=salts,
        generation=field_.generation + 1,
    )
