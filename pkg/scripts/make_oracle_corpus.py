#!/usr/bin/env python3
"""Regenerate the oracle-equivalence fixture corpus.

Emits src/fpplab/fixtures/oracle_corpus.json: 50 exact-mode 2D fixtures over
four weight families (unit, two-point with a zero atom, three-point table,
discretised uniform), each with two certified pairs and a ray source for the
bad-vertex comparisons.  Seeds are arbitrary but frozen; the selftest suite
demands exact agreement with brute force on every fixture.
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "fpplab" / "fixtures" / "oracle_corpus.json"

# zero-atom fields wander zero-weight plateaus, so their enumerations must run
# to the full self-avoiding length bound; keep those boxes at radius 2
FAMILIES = [
    {
        "tag": "unit",
        "dist": {"kind": "point-mass", "params": [1.0]},
        "heavy_value": 0.5,
        "count": 13,
        "seed0": 0,
        "cap_extra": 8,
        "radii": (2, 3),
    },
    {
        "tag": "bern",
        "dist": {"kind": "bernoulli-two-point", "params": [0.0, 1.0, 0.3]},
        "heavy_value": 0.5,
        "count": 13,
        "seed0": 100,
        "cap_extra": 26,
        "radii": (2, 2),
    },
    {
        "tag": "table3",
        "dist": {"kind": "finite-table", "params": [0.5, 1.0, 2.0, 0.3, 0.5, 0.2]},
        "heavy_value": 1.5,
        "count": 12,
        "seed0": 200,
        "cap_extra": 16,
        "radii": (2, 3),
    },
    {
        "tag": "unif",
        "dist": {"kind": "uniform-interval", "params": [0.0, 1.0]},
        "heavy_value": 0.5,
        "count": 12,
        "seed0": 300,
        "cap_extra": 12,
        "radii": (2, 3),
    },
]


def main():
    corpus = []
    for fam in FAMILIES:
        for i in range(fam["count"]):
            radius = fam["radii"][i % 2]
            if radius == 2:
                pairs = [[[-1, -1], [1, 1]], [[0, 0], [1, 2]]]
            else:
                pairs = [[[-1, -1], [1, 1]], [[0, 0], [2, 1]]]
            corpus.append(
                {
                    "name": f"{fam['tag']}-r{radius}-s{fam['seed0'] + i}",
                    "seed": fam["seed0"] + i,
                    "radius": radius,
                    "dist": fam["dist"],
                    "grid_log2": 40,
                    "pairs": pairs,
                    "cap_extra": fam["cap_extra"],
                    "heavy_value": fam["heavy_value"],
                    "probe": [0, 0],
                    "ray_source": [1, 1],
                }
            )
    assert len(corpus) == 50
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(corpus, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(corpus)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
