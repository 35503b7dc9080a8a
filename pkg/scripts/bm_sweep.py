"""Brunn-Minkowski deficits for pairs of planar bodies at two resolutions.

Writes the deficits per (pair, lambda, resolution); the square/disk values at
the default resolution are the golden data of the test suite.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from _common import REPO, dump, parse_config

from rcl.geometry import disk, ellipsoid, equilateral_triangle, unit_square
from rcl.verify import check_brunn_minkowski

BODIES = {"square": unit_square, "disk": disk, "triangle": equilateral_triangle,
          "ellipse": lambda: ellipsoid((0.0, 0.0), (1.0, 0.5))}


@dataclass
class Config:
    pairs: list = field(default_factory=lambda: ["square:disk", "disk:triangle", "square:ellipse"])
    lambdas: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    resolutions: list = field(default_factory=lambda: [500, 1000])
    alpha: float = 1.0
    output: str = os.path.join(REPO, "tests", "golden", "bm_deficits.json")


def main():
    cfg = parse_config(Config, __doc__)
    rows = []
    for pair in cfg.pairs:
        a, b = pair.split(":")
        for res in cfg.resolutions:
            rep = check_brunn_minkowski(BODIES[a](), BODIES[b](), cfg.alpha, cfg.lambdas, int(res))
            for r in rep.records:
                d = r.details
                rows.append({"pair": pair, "resolution": int(res), "lambda": d["lambda"],
                             "capacity_0": d["capacity_0"], "capacity_1": d["capacity_1"],
                             "capacity_lambda": d["capacity_lambda"], "deficit_power": d["deficit_power"],
                             "deficit_min": d["deficit_min"]})
                print(f"{pair:15s} n={res:5d} lambda={d['lambda']:.2f} "
                      f"power={d['deficit_power']:+.5f} min={d['deficit_min']:+.5f}")
    dump(cfg.output, {"alpha": cfg.alpha, "rows": rows})


if __name__ == "__main__":
    main()
