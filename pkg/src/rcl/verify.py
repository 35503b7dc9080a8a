"""Property harnesses: level-set convexity, Brunn-Minkowski, the envelope
construction, continuity under dilation and the mean-width ranking.

Each harness returns a :class:`VerificationReport` whose overall verdict is
the conjunction of its records.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .equilibrium import DEFAULT_RESOLUTION, capacity, equilibrium
from .errors import InvalidArgument, RCLError
from .geometry import (Ball, Blend, ConvexBody, Ellipsoid, diameter, dilate, mean_width, minkowski_interpolate,
                       perimeter_2d)
from .potential import PotentialField, measure_center, potential_field

BM_TOL = 1e-2
QC_TOL = 1e-3
ENVELOPE_TOL = 2e-2
CONTINUITY_TOL = 1e-2


@dataclass
class Record:
    case: str
    value: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    harness: str
    parameters: dict
    records: list
    runtime: float = 0.0
    exploratory: bool = False

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {"harness": self.harness, "parameters": self.parameters, "exploratory": self.exploratory,
                "records": [asdict(r) for r in self.records], "pass": self.passed, "runtime": self.runtime}


@dataclass(frozen=True)
class BMRecord:
    lam: float
    capacity_lambda: float
    deficit_power: float
    deficit_min: float


def workers() -> int:
    """Thread cap from ``RCL_THREADS`` (default: CPU count)."""
    raw = os.environ.get("RCL_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidArgument(f"RCL_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _map(fn, items):
    items = list(items)
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def _safe_capacity(body, alpha, resolution):
    try:
        return capacity(body, alpha, resolution), None
    except RCLError as exc:
        return None, f"{type(exc).__name__}: {exc}"


# -- level-set convexity -----------------------------------------------------------


def _field_box(field) -> tuple[np.ndarray, float]:
    if field.body is not None:
        d = diameter(field.body)
        c = field.body.reference_point()
    else:
        pts = field.cloud.points
        d = float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))) if len(pts) < 3000 else \
            float(np.linalg.norm(pts.max(0) - pts.min(0)))
        c = measure_center(field)
    return c, 4.0 * max(d, 1e-12)


def check_level_set_convexity(field: PotentialField | Callable, segments: int = 10_000, seed: int = 0,
                              tol: float = QC_TOL, center=None, side: float | None = None,
                              dim: int | None = None) -> VerificationReport:
    """Random-segment test of ``v(lam x + (1-lam) y) >= min(v(x), v(y)) - tol``.

    Points are uniform in a cube of side ``4 diam`` around the body (or the
    cube given by ``center`` / ``side`` for plain callables).
    """
    t0 = time.perf_counter()
    if segments < 1:
        raise InvalidArgument("segments must be positive")
    if isinstance(field, PotentialField):
        c0, s0 = _field_box(field)
        dim = field.dim
    else:
        if dim is None and center is None:
            raise InvalidArgument("callable fields need dim or center")
        dim = dim if dim is not None else len(center)
        c0, s0 = np.zeros(dim), 8.0
    c = c0 if center is None else np.asarray(center, float)
    s = s0 if side is None else float(side)
    rng = np.random.default_rng(seed)
    x = c + s * (rng.random((segments, dim)) - 0.5)
    y = c + s * (rng.random((segments, dim)) - 0.5)
    lam = rng.random((segments, 1))
    z = lam * x + (1 - lam) * y
    v = np.asarray(field(np.vstack([x, y, z])), float)
    vx, vy, vz = v[:segments], v[segments:2 * segments], v[2 * segments:]
    viol = np.minimum(vx, vy) - vz
    k = int(np.argmax(viol))
    worst = float(viol[k])
    rec = Record("quasi-concavity", worst, tol, worst <= tol,
                 {"violations": int(np.sum(viol > tol)), "segments": segments,
                  "worst_x": x[k].tolist(), "worst_y": y[k].tolist(), "worst_lambda": float(lam[k, 0])})
    params = {"segments": segments, "seed": seed, "tol": tol, "box_center": np.asarray(c).tolist(), "box_side": s}
    return VerificationReport("levelset", params, [rec], time.perf_counter() - t0)


# -- Brunn-Minkowski -----------------------------------------------------------------


def bm_deficits(cap0: float, cap1: float, cap_lam: float, lam: float, dim: int, alpha: float):
    """Relative power-form and min-form deficits of ``Cap(lam K1 + (1-lam) K0)``.

    Power form: ``Cap_lam^q - ((1-lam) Cap0^q + lam Cap1^q)`` with
    ``q = 1/(N - alpha)``, over ``min(Cap0^q, Cap1^q)``. Min form:
    ``Cap_lam - min(Cap0, Cap1)`` over ``min(Cap0, Cap1)``.
    """
    q = 1.0 / (dim - alpha)
    rhs = (1 - lam) * cap0**q + lam * cap1**q
    power = (cap_lam**q - rhs) / min(cap0**q, cap1**q)
    low = min(cap0, cap1)
    return BMRecord(float(lam), float(cap_lam), float(power), float((cap_lam - low) / low))


def bm_records_from_table(cap0: float, cap1: float, table: dict, dim: int, alpha: float,
                          tol: float = BM_TOL) -> list:
    """Records for ``{lam: Cap(K_lam)}``; the pass rule is shared with the sweep."""
    out = []
    for lam in sorted(table):
        r = bm_deficits(cap0, cap1, table[lam], lam, dim, alpha)
        ok = r.deficit_power >= -tol and r.deficit_min >= -tol
        out.append(Record(f"lambda={lam:g}", r.deficit_power, -tol, ok,
                          {"lambda": r.lam, "capacity_lambda": r.capacity_lambda, "capacity_0": cap0,
                           "capacity_1": cap1, "deficit_power": r.deficit_power, "deficit_min": r.deficit_min}))
    return out


def check_brunn_minkowski(k0: ConvexBody, k1: ConvexBody, alpha: float = 1.0,
                          lambdas: Sequence[float] = (0.25, 0.5, 0.75), resolution: int | None = None,
                          tol: float = BM_TOL) -> VerificationReport:
    """Sweep ``lam`` and compare ``Cap_alpha(K_lam)`` with both BM right-hand sides.

    Sweeps with ``alpha != 1`` test an open conjecture and are flagged as
    exploratory. A solver failure at one ``lam`` becomes a failing record.
    """
    t0 = time.perf_counter()
    if k0.dim != k1.dim:
        raise InvalidArgument(f"dimension mismatch: {k0.dim} vs {k1.dim}")
    dim = k0.dim
    if not 0 < alpha < dim:
        raise InvalidArgument(f"alpha={alpha} outside (0, {dim})")
    lambdas = [float(l) for l in lambdas]
    for lam in lambdas:
        if not 0 <= lam <= 1:
            raise InvalidArgument(f"lambda={lam} outside [0, 1]")
    res = resolution or DEFAULT_RESOLUTION.get(dim, 500)
    bodies = [k0, k1] + [minkowski_interpolate(k0, k1, lam) for lam in lambdas]
    sols = _map(lambda b: _safe_capacity(b, alpha, res), bodies)
    params = {"k0": k0.to_dict(), "k1": k1.to_dict(), "alpha": alpha, "lambdas": lambdas, "resolution": res,
              "tol": tol}
    exploratory = alpha != 1.0
    (c0, e0), (c1, e1) = sols[0], sols[1]
    if c0 is None or c1 is None:
        rec = Record("endpoints", float("nan"), -tol, False, {"error": e0 or e1})
        return VerificationReport("bm", params, [rec], time.perf_counter() - t0, exploratory)
    table, records = {}, []
    for lam, (c, err) in zip(lambdas, sols[2:]):
        if c is None:
            records.append(Record(f"lambda={lam:g}", float("nan"), -tol, False, {"lambda": lam, "error": err}))
        else:
            table[lam] = c.capacity
    records += bm_records_from_table(c0.capacity, c1.capacity, table, dim, alpha, tol)
    records.sort(key=lambda r: r.details["lambda"])
    return VerificationReport("bm", params, records, time.perf_counter() - t0, exploratory)


# -- the Step-2 envelope -------------------------------------------------------------


def _envelope_search(v0, v1, x: np.ndarray, lam: float, c1: np.ndarray, c_lam: np.ndarray, reach: float,
                     grid: int = 13, rounds: int = 4):
    """Lower bound of ``sup min(v0(x0), v1(x1))`` over ``x = lam x1 + (1-lam) x0``.

    Grid over ``x1`` centred at ``c1 + (x - c_lam)``, then repeated local
    refinement around the best candidate of each probe.
    """
    m, dim = x.shape
    center = c1 + (x - c_lam)
    half = np.full(m, reach) + 0.5 * np.linalg.norm(x - c_lam, axis=1)
    axis = np.linspace(-1.0, 1.0, grid)
    offs = np.stack([g.ravel() for g in np.meshgrid(*([axis] * dim), indexing="ij")], axis=1)
    best_val = np.full(m, -np.inf)
    best_x1 = center.copy()
    for r in range(rounds):
        cand = center[:, None, :] + half[:, None, None] * offs[None, :, :]
        flat = cand.reshape(-1, dim)
        x0 = (np.repeat(x, len(offs), axis=0) - lam * flat) / (1 - lam)
        val = np.minimum(v0(x0), v1(flat)).reshape(m, len(offs))
        k = np.argmax(val, axis=1)
        top = val[np.arange(m), k]
        better = top > best_val
        best_val[better] = top[better]
        best_x1[better] = cand[np.arange(m), k][better]
        center = best_x1.copy()
        half = half * 2.5 / (grid - 1)
    return best_val, best_x1


def _superlevel_sample(v, level: float, center: np.ndarray, half: float, count: int, rng, batch: int = 4000,
                       max_batches: int = 50) -> np.ndarray:
    dim = len(center)
    got = []
    n = 0
    for _ in range(max_batches):
        p = center + half * (2 * rng.random((batch, dim)) - 1)
        keep = p[v(p) > level]
        got.append(keep)
        n += len(keep)
        if n >= count:
            break
    pts = np.vstack(got) if got else np.zeros((0, dim))
    return pts[:count]


def envelope_check(k0: ConvexBody, k1: ConvexBody, lam: float = 0.5, levels: Sequence[float] = (0.3, 0.5, 0.7),
                   samples: int = 1000, tol: float = ENVELOPE_TOL, resolution: int | None = None, seed: int = 0,
                   fields: tuple | None = None) -> VerificationReport:
    """Domination ``v_lam >= ~v_lam - tol`` and level-set inclusion for ``alpha = 1``.

    ``fields`` may pass precomputed ``(v0, v1, v_lam)``; otherwise the three
    capacitary functions are solved here.
    """
    t0 = time.perf_counter()
    if not 0 < lam < 1:
        raise InvalidArgument(f"lambda={lam} must lie in (0, 1)")
    if k0.dim != k1.dim:
        raise InvalidArgument(f"dimension mismatch: {k0.dim} vs {k1.dim}")
    k_lam = minkowski_interpolate(k0, k1, lam)
    if fields is None:
        res = resolution or DEFAULT_RESOLUTION.get(k0.dim, 500)
        eqs = _map(lambda b: equilibrium(b, 1.0, res), [k0, k1, k_lam])
        fields = tuple(potential_field(e, True, unit_on_body=True) for e in eqs)
    v0, v1, vl = fields
    rng = np.random.default_rng(seed)
    dim = k0.dim
    c0, c1, cl = (b.reference_point() for b in (k0, k1, k_lam))
    reach = max(diameter(k0), diameter(k1))
    params = {"k0": k0.to_dict(), "k1": k1.to_dict(), "lambda": lam, "levels": list(levels), "samples": samples,
              "tol": tol, "seed": seed, "resolution": resolution}

    probes = cl + 1.5 * reach * (2 * rng.random((samples, dim)) - 1)
    env, _ = _envelope_search(v0, v1, probes, lam, c1, cl, reach)
    gap = env - vl(probes)
    k = int(np.argmax(gap))
    records = [Record("domination", float(gap[k]), tol, bool(gap[k] <= tol),
                      {"probes": samples, "failures": int(np.sum(gap > tol)), "worst_probe": probes[k].tolist()})]

    for s in levels:
        s = float(s)
        # v ~ Cap / |x|^(N-1) far out, so {v > s} sits inside radius (Cap / s)^(1/(N-1))
        p1, p0 = (_superlevel_sample(v, s, c, diameter(k) + 1.2 * (1.0 / (v.normalization * s)) ** (1.0 / (dim - 1)),
                                     samples, rng) for v, c, k in ((v1, c1, k1), (v0, c0, k0)))
        if len(p1) == 0 or len(p0) == 0:
            records.append(Record(f"inclusion s={s:g}", 0.0, 0.0, True, {"points": 0, "vacuous": True}))
            continue
        m = min(len(p0), len(p1))
        i1 = rng.integers(0, len(p1), samples)
        i0 = rng.integers(0, len(p0), samples)
        z = lam * p1[i1] + (1 - lam) * p0[i0]
        fails = int(np.sum(vl(z) <= s - tol))
        records.append(Record(f"inclusion s={s:g}", float(fails), 0.0, fails == 0,
                              {"points": samples, "superlevel_0": len(p0), "superlevel_1": len(p1),
                               "pairs_from": m}))
    return VerificationReport("envelope", params, records, time.perf_counter() - t0)


# -- continuity under dilation -----------------------------------------------------


def capacity_continuity_check(body: ConvexBody, epsilons: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                              alpha: float = 1.0, resolution: int | None = None,
                              tol: float = CONTINUITY_TOL) -> VerificationReport:
    """``Cap(K + B(eps))`` along decreasing ``eps`` against ``Cap(K)``."""
    t0 = time.perf_counter()
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidArgument("epsilons must be positive and strictly decreasing")
    res = resolution or DEFAULT_RESOLUTION.get(body.dim, 500)
    caps = _map(lambda e: capacity(dilate(body, e), alpha, res).capacity, eps + [0.0])
    base, seq = caps[-1], np.array(caps[:-1])
    params = {"body": body.to_dict(), "epsilons": eps, "alpha": alpha, "resolution": res, "tol": tol}
    records = [Record(f"eps={e:g}", float(c), base, True, {"epsilon": e, "capacity": float(c)})
               for e, c in zip(eps, seq)]
    records.append(Record("eps=0", float(base), base, True, {"epsilon": 0.0, "capacity": float(base)}))
    steps = np.diff(seq)  # Cap(eps_{k+1}) - Cap(eps_k), nonpositive when monotone
    worst = float(steps.max() / base) if len(steps) else 0.0
    records.append(Record("monotone", worst, 0.0, worst <= 0.0, {"steps": steps.tolist()}))
    if len(steps) > 1:
        ratios = np.abs(steps[1:]) / np.maximum(np.abs(steps[:-1]), 1e-300)
        records.append(Record("shrinking differences", float(ratios.max()), 1.0, bool(ratios.max() < 1.0),
                              {"ratios": ratios.tolist()}))
    deg = min(2, len(eps) - 1)
    e_arr = np.array(eps)
    limit = float(np.polyval(np.polyfit(e_arr / e_arr.max(), seq, deg), 0.0)) if deg > 0 else float(seq[-1])
    rel = abs(limit - base) / base
    records.append(Record("extrapolated limit", rel, tol, rel <= tol, {"limit": limit, "capacity": base}))
    return VerificationReport("continuity", params, records, time.perf_counter() - t0)


# -- mean-width isoperimetry -----------------------------------------------------------


def is_ball(body: ConvexBody) -> bool:
    if isinstance(body, Ball):
        return True
    if isinstance(body, Ellipsoid):
        return bool(np.allclose(body.semi_axes, body.semi_axes[0], rtol=1e-12))
    if isinstance(body, Blend):
        return all(is_ball(b) for _, b in body.active())
    return False


def isoperimetric_search(family: Sequence[ConvexBody], alpha: float = 1.0,
                         constraint: tuple = ("mean_width", 2.0), resolutions: Sequence[int] = (500, 1000),
                         names: Sequence[str] | None = None, scatter_factor: float = 3.0) -> VerificationReport:
    """Rank ``I_alpha`` over a family rescaled to a common mean width (or perimeter).

    The ball must come first with a margin above ``scatter_factor`` times the
    largest change of any ``I_alpha`` between the two resolutions. The
    scale-free ratio ``M(K) / Cap^(1/(N-alpha))`` is reported per body.
    """
    t0 = time.perf_counter()
    if not family:
        raise InvalidArgument("family must be nonempty")
    kind, target = constraint
    names = list(names) if names is not None else [f"{i}:{b.kind}" for i, b in enumerate(family)]
    dims = {b.dim for b in family}
    if len(dims) != 1:
        raise InvalidArgument("family members must share a dimension")
    dim = dims.pop()
    if kind == "perimeter" and dim != 2:
        raise InvalidArgument("perimeter constraint needs N = 2")
    if kind not in ("mean_width", "perimeter"):
        raise InvalidArgument(f"unknown constraint {kind!r}")
    params = {"alpha": alpha, "constraint": [kind, target], "resolutions": list(resolutions),
              "names": names, "family": [b.to_dict() for b in family], "scatter_factor": scatter_factor}
    q = 1.0 / (dim - alpha)
    rows, records = [], []
    for name, body in zip(names, family):
        try:
            size = mean_width(body) if kind == "mean_width" else perimeter_2d(body)
            if body.degenerate or size <= 0:
                raise InvalidArgument("degenerate body cannot meet the constraint")
            scaled = body.scale(target / size)
            energies = [capacity(scaled, alpha, r).energy for r in resolutions]
        except RCLError as exc:
            records.append(Record(f"body {name}", float("nan"), 0.0, False, {"error": str(exc)}))
            continue
        width = mean_width(scaled)
        rows.append({"name": name, "ball": is_ball(body), "energy": energies[-1], "energies": energies,
                     "ratio": width * energies[-1] ** q})
    rows.sort(key=lambda r: r["energy"])
    scatter = max((abs(r["energies"][-1] - r["energies"][0]) for r in rows), default=0.0)
    for rank, r in enumerate(rows, 1):
        records.append(Record(f"rank {rank}: {r['name']}", r["energy"], float("nan"), True,
                              {"energies": r["energies"], "ratio_M_over_cap_root": r["ratio"], "ball": r["ball"]}))
    if rows:
        first_ball = rows[0]["ball"]
        margin = rows[1]["energy"] - rows[0]["energy"] if len(rows) > 1 else math.inf
        need = scatter_factor * scatter
        ok = first_ball and margin > need
        records.append(Record("ball first", float(margin), float(need), bool(ok),
                              {"leader": rows[0]["name"], "scatter": scatter}))
    return VerificationReport("isoperimetric", params, records, time.perf_counter() - t0, exploratory=alpha != 1.0)
