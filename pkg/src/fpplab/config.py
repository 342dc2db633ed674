"""Experiment configuration: dataclass, JSON round-trip, strict validation.

Configs are plain JSON (schema shipped in ``schema/experiment_config.schema.json``)
with a closed key set: unknown keys are rejected, both at the top level and
inside the kind-specific parameter block, so a typo cannot silently run a
different experiment.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field

from .weights import DistributionSpec

EXPERIMENT_KINDS = {
    "passage-time-mean": frozenset({"k"}),
    "geodesic-stats": frozenset({"k_list", "heavy_m"}),
    "speed-bound": frozenset({"k_list", "delta", "trials_per_k"}),
    "black-scan": frozenset(
        {"k_list", "delta", "m", "budget", "otherwise_rule", "size_reading"}
    ),
    "resample-exp": frozenset({"m", "max_attempts"}),
    "uniqueness": frozenset(),
}

_TOP_KEYS = {
    "kind",
    "dimension",
    "radius",
    "dist",
    "mode",
    "trials",
    "master_seed",
    "grid_log2",
    "workers",
    "params",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dimension: int
    radius: int
    dist: DistributionSpec
    mode: str
    trials: int
    master_seed: int
    grid_log2: int | None = None
    workers: int = 1
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.dimension < 2:
            raise ConfigError("dimension must be >= 2")
        if self.radius < 0:
            raise ConfigError("radius must be >= 0")
        if self.mode not in ("exact", "float"):
            raise ConfigError("mode must be exact or float")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        unknown = set(self.params) - EXPERIMENT_KINDS[self.kind]
        if unknown:
            raise ConfigError(
                f"unknown params for kind {self.kind}: {sorted(unknown)}"
            )

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "dimension": self.dimension,
            "radius": self.radius,
            "dist": self.dist.to_json(),
            "mode": self.mode,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "params": dict(self.params),
        }
        if self.grid_log2 is not None:
            out["grid_log2"] = self.grid_log2
        return out

    @staticmethod
    def from_json(obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"kind", "dimension", "radius", "dist", "mode", "trials", "master_seed"} - set(obj)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return ExperimentConfig(
            kind=obj["kind"],
            dimension=int(obj["dimension"]),
            radius=int(obj["radius"]),
            dist=DistributionSpec.from_json(obj["dist"]),
            mode=obj["mode"],
            trials=int(obj["trials"]),
            master_seed=int(obj["master_seed"]),
            grid_log2=int(obj["grid_log2"]) if obj.get("grid_log2") is not None else None,
            workers=int(obj.get("workers", 1)),
            params=dict(obj.get("params", {})),
        )

    @staticmethod
    def load(path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return ExperimentConfig.from_json(json.load(fh))


def default_workers() -> int:
    env = os.environ.get("FPP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FPP_WORKERS must be an integer, got {env!r}")
    return 1
