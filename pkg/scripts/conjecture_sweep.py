"""Exploratory Brunn-Minkowski sweeps for general alpha (open conjecture).

Default grid: alpha in {0.5, 1.0, 1.5} in the plane (square vs disk) and
alpha in {1.0, 2.0} in space (cube vs ball, coarse resolution).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from _common import REPO, dump, parse_config

from rcl.geometry import ball, box, disk, unit_square
from rcl.verify import check_brunn_minkowski


@dataclass
class Config:
    alphas_2d: list = field(default_factory=lambda: [0.5, 1.0, 1.5])
    alphas_3d: list = field(default_factory=lambda: [1.0, 2.0])
    lambdas: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    resolution_2d: int = 500
    resolution_3d: int = 800
    output: str = os.path.join(REPO, "results", "conjecture_sweep.json")


def main():
    cfg = parse_config(Config, __doc__)
    runs = [(2, a, unit_square(), disk(), cfg.resolution_2d) for a in cfg.alphas_2d]
    cube = box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    runs += [(3, a, cube, ball((0.0, 0.0, 0.0), 0.6), cfg.resolution_3d) for a in cfg.alphas_3d]
    out = []
    for dim, alpha, k0, k1, res in runs:
        rep = check_brunn_minkowski(k0, k1, alpha, cfg.lambdas, res)
        label = "exploratory" if rep.exploratory else "theorem"
        for r in rep.records:
            d = r.details
            print(f"N={dim} alpha={alpha:.2f} [{label}] lambda={d.get('lambda', float('nan')):.2f} "
                  f"power={d.get('deficit_power', float('nan')):+.5f} pass={r.passed}")
        out.append({"dim": dim, "alpha": alpha, "resolution": res, "exploratory": rep.exploratory,
                    "pass": rep.passed, "records": [r.details for r in rep.records]})
    dump(cfg.output, {"runs": out})


if __name__ == "__main__":
    main()
