"""First-passage percolation laboratory.

Passage times and geodesic DAGs over finite lattice boxes, bad-vertex and
coalescence statistics for boundary rays, edge-resampling couplings, pair and
box certificates, and a seeded Monte Carlo harness, all validated against
brute-force enumeration on small instances.
"""

from . import certify, config, fpt, geodesics, harness, lattice, oracle, weights
from .config import ExperimentConfig
from .weights import DistributionSpec

__all__ = [
    "certify",
    "config",
    "fpt",
    "geodesics",
    "harness",
    "lattice",
    "oracle",
    "weights",
    "ExperimentConfig",
    "DistributionSpec",
]

__version__ = "0.1.0"
