"""Rank I_alpha over planar bodies rescaled to a common mean width."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from _common import REPO, dump, parse_config

from rcl.geometry import disk, ellipsoid, equilateral_triangle, unit_square
from rcl.verify import isoperimetric_search


@dataclass
class Config:
    alpha: float = 1.0
    mean_width: float = 2.0
    resolutions: list = field(default_factory=lambda: [500, 1000])
    output: str = os.path.join(REPO, "results", "isoperimetric.json")


def main():
    cfg = parse_config(Config, __doc__)
    family = [disk(), unit_square(), ellipsoid((0.0, 0.0), (1.0, 0.5)), equilateral_triangle()]
    names = ["disk", "square", "ellipse", "triangle"]
    rep = isoperimetric_search(family, cfg.alpha, ("mean_width", cfg.mean_width),
                               [int(r) for r in cfg.resolutions], names)
    for r in rep.records:
        print(f"{r.case:24s} {r.value:.8f}  {r.details}")
    print("pass" if rep.passed else "FAIL")
    dump(cfg.output, rep.to_dict())


if __name__ == "__main__":
    main()
