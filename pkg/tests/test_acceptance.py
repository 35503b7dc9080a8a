"""End-to-end acceptance checks, one test per criterion.

Each test stores ``(passed, summary)`` in ``conftest.ACCEPTANCE`` before
asserting, so the terminal summary prints one line per criterion.
"""

import time

import numpy as np

from _oracles import grid_bound, grid_minimum, random_kernel, support_enumeration_minimum
from conftest import ACCEPTANCE, golden, named_body, solved
from rcl import geometry as g
from rcl.equilibrium import KernelMatrix, capacity, equilibrium, solve_equilibrium
from rcl.potential import (ExtensionField, decay_probe, fractional_laplacian_via_extension, gaussian,
                           harmonic_extension, potential_field, riesz_potential, spectral_fractional_laplacian)
from rcl.verify import (capacity_continuity_check, check_brunn_minkowski, check_level_set_convexity, envelope_check,
                        isoperimetric_search)


def record(k, ok, text):
    ACCEPTANCE[k] = (bool(ok), text)
    assert ok, text


def test_criterion_01_equilibrium_certificate():
    lines, ok = [], True
    for name in ("disk", "square", "triangle"):
        t0 = time.perf_counter()
        eq = equilibrium(named_body(name), 1.0, 500)
        dt = time.perf_counter() - t0
        r = eq.result
        good = r.kkt_residual <= 1e-7 and r.plateau_deviation <= 2e-2 and dt <= 30
        ok &= good
        lines.append(f"{name}: kkt {r.kkt_residual:.1e}, plateau {r.plateau_deviation:.1e}, {dt:.1f} s")
    record(1, ok, "; ".join(lines))


def test_criterion_02_scaling_law():
    radii = np.array([0.5, 1.0, 2.0, 4.0])
    # (body, N, alpha, resolution) at the default resolutions
    cases = [(g.equilateral_triangle(), 2, 0.5, 500), (g.equilateral_triangle(), 2, 1.0, 500),
             (g.equilateral_triangle(), 2, 1.5, 500), (g.ball((0, 0, 0), 1.0), 3, 1.0, 2000)]
    lines, ok = [], True
    for body, dim, alpha, res in cases:
        caps = [capacity(body.scale(r), alpha, res).capacity for r in radii]
        slope = np.polyfit(np.log(radii), np.log(caps), 1)[0]
        rel = abs(slope - (dim - alpha)) / (dim - alpha)
        ok &= rel <= 1e-2
        lines.append(f"(N={dim}, a={alpha:g}) slope {slope:.6f}")
    record(2, ok, "; ".join(lines))


def test_criterion_03_small_instance_oracle():
    rng = np.random.default_rng(2024)
    sizes = [2, 3, 3, 4, 4, 5, 5, 6, 6, 6, 7, 8, 8, 9, 9, 10, 10, 11, 12, 12]
    worst_grid, worst_exact, ok = 0.0, 0.0, True
    for n in sizes:
        dim = int(rng.integers(2, 4))
        alpha = float(rng.choice([0.5, 1.0, 1.5]))
        A = random_kernel(n, dim, alpha, rng)
        _, res = solve_equilibrium(KernelMatrix(A, alpha, dim, "random cloud"))
        exact = support_enumeration_minimum(A)
        worst_exact = max(worst_exact, abs(res.energy - exact) / exact)
        ok &= abs(res.energy - exact) <= 1e-10 * exact
        if n <= 6:
            gap = grid_minimum(A) - res.energy
            bound = grid_bound(A)
            worst_grid = max(worst_grid, gap / bound)
            ok &= -1e-12 <= gap <= bound
    record(3, ok, f"20 clouds (n=2..12): grid gap / resolution bound <= {worst_grid:.3f} (n<=6), "
                  f"max rel. diff to exact support enumeration {worst_exact:.1e}")


BM_PAIRS = {"square:disk": (g.unit_square, g.disk), "disk:triangle": (g.disk, g.equilateral_triangle),
            "square:ellipse": (g.unit_square, lambda: g.ellipsoid((0.0, 0.0), (1.0, 0.5)))}


def test_criterion_04_brunn_minkowski():
    gold = golden("bm_deficits.json")["rows"]
    ok, lines = True, []
    worst_def, worst_cap, worst_repro = np.inf, 0.0, 0.0
    for pair, (f0, f1) in BM_PAIRS.items():
        rep = check_brunn_minkowski(f0(), f1(), 1.0, (0.25, 0.5, 0.75), 500)
        ok &= rep.passed
        for rec in rep.records:
            d = rec.details
            worst_def = min(worst_def, d["deficit_power"], d["deficit_min"])
            row = {r["resolution"]: r for r in gold if r["pair"] == pair and r["lambda"] == d["lambda"]}
            # the live run reproduces the stored n=500 row; the n=1000 row comes from the same pipeline
            worst_repro = max(worst_repro, abs(row[500]["deficit_power"] - d["deficit_power"]))
            dcap = abs(row[1000]["capacity_lambda"] - d["capacity_lambda"]) / row[1000]["capacity_lambda"]
            ddef = max(abs(row[1000]["deficit_power"] - d["deficit_power"]),
                       abs(row[1000]["deficit_min"] - d["deficit_min"]))
            worst_cap = max(worst_cap, dcap)
            ok &= dcap <= 1e-2 and ddef <= 1e-2
    ok &= worst_repro <= 1e-9
    same = check_brunn_minkowski(g.unit_square(), g.unit_square(), 1.0, (0.25, 0.5, 0.75), 500)
    ident = max(abs(r.details["deficit_power"]) for r in same.records)
    ok &= ident <= 1e-6
    lines.append(f"min deficit {worst_def:+.4f}")
    lines.append(f"capacity change 500->1000 <= {worst_cap:.2%}")
    lines.append(f"identical bodies |deficit| {ident:.1e}")
    record(4, ok, "; ".join(lines))


def test_criterion_05_level_set_convexity():
    ok, lines = True, []
    for name in ("square", "triangle"):
        eq = solved(name)
        clamped = check_level_set_convexity(potential_field(eq, unit_on_body=True), 10_000, seed=0)
        raw = check_level_set_convexity(potential_field(eq), 10_000, seed=0)
        ok &= clamped.passed and raw.passed
        lines.append(f"{name} worst {clamped.records[0].value:.1e} (unclamped {raw.records[0].value:.1e})")

    def bumps(x):
        p = np.array([2.0, 0.0])
        return np.exp(-np.sum((x - p) ** 2, axis=1)) + np.exp(-np.sum((x + p) ** 2, axis=1))

    control = check_level_set_convexity(bumps, 10_000, dim=2)
    ok &= not control.passed
    lines.append(f"two-bump control: {control.records[0].details['violations']} violations")
    record(5, ok, "; ".join(lines))


def test_criterion_06_envelope():
    rep = envelope_check(g.unit_square(), g.disk(), 0.5, (0.3, 0.5, 0.7), samples=1000, tol=2e-2, resolution=500)
    dom = rep.records[0]
    fails = sum(int(r.value) for r in rep.records[1:])
    record(6, rep.passed, f"domination gap {dom.value:+.1e} on {dom.details['probes']} probes; "
                          f"inclusion failures {fails}")


def test_criterion_07_decay():
    ok, lines = True, []
    for name in ("disk", "square"):
        eq = solved(name)
        r = 50 * g.diameter(eq.body)
        (_, val), = decay_probe(potential_field(eq), [r])
        rel = abs(val - eq.result.capacity) / eq.result.capacity
        ok &= rel <= 2e-2
        lines.append(f"{name}: rel. error {rel:.1e} at r={r:.1f}")
    record(7, ok, "; ".join(lines))


def _fd_laplacian(ext, x, t, h):
    U = lambda xx, tt: harmonic_extension(ext, np.asarray(xx), tt)
    c = U(x, t)
    s = U(x, t + h) + U(x, t - h) - 2 * c
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = h
        s += U(x + e, t) + U(x - e, t) - 2 * c
    return s / (h * h)


def test_criterion_08_extension_identities():
    eq = solved("disk")
    f = potential_field(eq)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-2, 2, (1000, 2))
    a = float(np.max(np.abs(harmonic_extension(f, pts, 0.0) - riesz_potential(f, pts))))
    ext = ExtensionField(f)
    x, t = np.array([4.0, 0.0]), 2.0
    res = [abs(_fd_laplacian(ext, x, t, h)) for h in (0.2, 0.1, 0.05)]
    order = min(np.log2(res[0] / res[1]), np.log2(res[1] / res[2]))
    spec = spectral_fractional_laplacian(gaussian, 2)(np.zeros(2))
    ext_val = fractional_laplacian_via_extension(gaussian, np.zeros(2))
    c = abs(ext_val - spec) / spec
    th, r = rng.uniform(0, 2 * np.pi, 100), rng.uniform(1.2, 3.0, 100)
    out = np.c_[r * np.cos(th), r * np.sin(th)]
    d = max(abs(fractional_laplacian_via_extension(f, p)) / f(p) for p in out)
    ok = a <= 1e-14 and order >= 1.9 and c <= 2e-2 and d <= 1e-2
    record(8, ok, f"(a) {a:.1e}; (b) order {order:.3f}; (c) {ext_val:.5f} vs spectral {spec:.5f} ({c:.2%}); "
                  f"(d) max |dU/dt|/v {d:.1e}")


def test_criterion_09_continuity():
    rep = capacity_continuity_check(g.disk(), (0.2, 0.1, 0.05, 0.025), 1.0, 500)
    lim = next(r for r in rep.records if r.case == "extrapolated limit")
    mono = next(r for r in rep.records if r.case == "monotone")
    record(9, rep.passed, f"monotone (max step {mono.value:+.1e}); extrapolated limit off by {lim.value:.1e}")


def test_criterion_10_isoperimetric():
    names = ["disk", "square", "ellipse", "triangle"]
    rep = isoperimetric_search([named_body(n) for n in names], 1.0, ("mean_width", 2.0), (500, 1000), names)
    top = next(r for r in rep.records if r.case == "ball first")
    ok = rep.passed
    worst = 0.0
    for name in ("square", "triangle"):
        # M / Cap^(1/(N - alpha)) with N - alpha = 1, for K and 3K solved as given
        k = named_body(name)
        r1 = g.mean_width(k) / capacity(k, 1.0, 500).capacity
        r3 = g.mean_width(k.scale(3.0)) / capacity(k.scale(3.0), 1.0, 500).capacity
        worst = max(worst, abs(r3 / r1 - 1))
    ok &= worst <= 1e-2
    order = [r.case.split(": ")[1] for r in rep.records if r.case.startswith("rank")]
    record(10, ok, f"order {' < '.join(order)}; margin {top.value:.4f} vs 3x scatter {top.threshold:.4f}; "
                   f"ratio drift under rescaling {worst:.1e}")


def test_criterion_11_conjecture_sweeps():
    ok, lines = True, []
    for alpha in (0.5, 1.5):
        rep = check_brunn_minkowski(g.unit_square(), g.disk(), alpha, (0.25, 0.5, 0.75), 500)
        worst = min(min(r.details["deficit_power"], r.details["deficit_min"]) for r in rep.records)
        ok &= rep.passed and rep.exploratory
        lines.append(f"alpha={alpha:g} (exploratory) min deficit {worst:+.4f}")
    record(11, ok, "; ".join(lines))
