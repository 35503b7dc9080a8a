"""Mesh-refinement reference for I_1 of the unit disk.

Solves at resolutions n, 4n, 16n (lattice step h, h/2, h/4), estimates the
observed order and extrapolates. The result is frozen in
tests/golden/disk_reference.json and compared with the closed form.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

from _common import REPO, dump, parse_config

from rcl.equilibrium import ball_energy, capacity
from rcl.geometry import disk


@dataclass
class Config:
    base_resolution: int = 125
    alpha: float = 1.0
    output: str = os.path.join(REPO, "tests", "golden", "disk_reference.json")


def richardson(e1: float, e2: float, e3: float):
    """Order and limit from three values at step ratio 2."""
    order = math.log2((e1 - e2) / (e2 - e3))
    limit = e3 - (e2 - e3) / (2**order - 1)
    return order, limit


def main():
    cfg = parse_config(Config, __doc__)
    ns = [cfg.base_resolution * 4**k for k in range(3)]
    energies = []
    for n in ns:
        r = capacity(disk(), cfg.alpha, n)
        print(f"n={n:5d} points={r.n_points:5d} I={r.energy:.12f}")
        energies.append(r.energy)
    order, limit = richardson(*energies)
    exact = ball_energy(2, cfg.alpha)
    print(f"order {order:.3f}  extrapolated I = {limit:.10f}  closed form {exact:.10f}")
    dump(cfg.output, {"body": "unit disk", "alpha": cfg.alpha, "resolutions": ns, "energies": energies,
                      "observed_order": order, "energy": limit, "capacity": 1.0 / limit,
                      "self_consistency": abs(limit - energies[-1]) / limit})


if __name__ == "__main__":
    main()
