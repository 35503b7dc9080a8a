import json
import os
import time
from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings

from rcl import geometry as g
from rcl.equilibrium import equilibrium

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
BODIES = os.path.join(os.path.dirname(__file__), "..", "bodies")

# criterion number -> (passed, summary); filled by test_acceptance.py
ACCEPTANCE: dict = {}
SUITE_BUDGET = 15 * 60
_START = [time.perf_counter()]


def golden(name: str) -> dict:
    with open(os.path.join(GOLDEN, name)) as fh:
        return json.load(fh)


def named_body(name: str):
    return {"disk": g.disk, "square": g.unit_square, "triangle": g.equilateral_triangle,
            "ellipse": lambda: g.ellipsoid((0.0, 0.0), (1.0, 0.5))}[name]()


@lru_cache(maxsize=None)
def solved(name: str, alpha: float = 1.0, resolution: int = 500):
    """Equilibria are deterministic, so one solve per configuration is shared."""
    return equilibrium(named_body(name), alpha, resolution)


@pytest.fixture(scope="session")
def disk_eq():
    return solved("disk")


@pytest.fixture(scope="session")
def square_eq():
    return solved("square")


def pytest_sessionstart(session):
    _START[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    elapsed = time.perf_counter() - _START[0]
    if 11 in ACCEPTANCE:
        ok, text = ACCEPTANCE[11]
        within = elapsed <= SUITE_BUDGET
        ACCEPTANCE[11] = (ok and within, f"{text}; suite runtime {elapsed:.0f} s (budget {SUITE_BUDGET} s)")
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")
