import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import solved
from rcl import geometry as g
from rcl.errors import InvalidArgument
from rcl.potential import potential_field
from rcl.verify import (Record, VerificationReport, bm_deficits, bm_records_from_table, capacity_continuity_check,
                        check_brunn_minkowski, check_level_set_convexity, envelope_check, is_ball,
                        isoperimetric_search, workers)


def two_bumps(x):
    p = np.array([2.0, 0.0])
    return np.exp(-np.sum((x - p) ** 2, axis=1)) + np.exp(-np.sum((x + p) ** 2, axis=1))


# -- level sets ----------------------------------------------------------------------


def test_radial_function_has_no_violations():
    rep = check_level_set_convexity(lambda x: np.exp(-np.linalg.norm(x, axis=1)), 5000, dim=2)
    assert rep.passed
    assert rep.records[0].value <= 1e-15


def test_two_bumps_fail():
    rep = check_level_set_convexity(two_bumps, 5000, dim=2)
    assert not rep.passed
    assert rep.records[0].details["violations"] > 0


def test_triangle_capacitary_function_quasi_concave():
    f = potential_field(solved("triangle"), unit_on_body=True)
    rep = check_level_set_convexity(f, 3000, seed=3)
    assert rep.passed, rep.records[0]


def test_levelset_seeded_and_validated():
    f = lambda x: -np.sum(x * x, axis=1)
    a = check_level_set_convexity(f, 1000, seed=9, dim=2)
    b = check_level_set_convexity(f, 1000, seed=9, dim=2)
    assert a.records[0] == b.records[0]
    with pytest.raises(InvalidArgument):
        check_level_set_convexity(f, 0, dim=2)
    with pytest.raises(InvalidArgument):
        check_level_set_convexity(f, 10)


# -- Brunn-Minkowski ---------------------------------------------------------------


def test_identical_bodies_zero_deficit():
    rep = check_brunn_minkowski(g.equilateral_triangle(), g.equilateral_triangle(), 1.0, (0.25, 0.5), 300)
    assert rep.passed
    for r in rep.records:
        assert abs(r.details["deficit_power"]) <= 1e-6


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_two_balls_zero_deficit(alpha):
    rep = check_brunn_minkowski(g.disk(0.5), g.disk(1.0, (0.2, 0.0)), alpha, (0.5,), 300)
    assert abs(rep.records[0].details["deficit_power"]) <= 1e-2
    assert rep.exploratory == (alpha != 1.0)


def test_lowered_capacity_table_fails():
    # square/disk capacities at n = 500, one interpolant lowered by 10%
    c0, c1 = 0.3666338068567566, 0.6354199304066405
    table = {0.25: 0.444465718533148, 0.5: 0.5133584848086751, 0.75: 0.5764196273042381}
    assert all(r.passed for r in bm_records_from_table(c0, c1, table, 2, 1.0))
    table[0.5] *= 0.9
    recs = bm_records_from_table(c0, c1, table, 2, 1.0)
    assert [r.passed for r in recs] == [True, False, True]


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.05, 20), st.floats(0, 1), st.floats(0.1, 1.9))
def test_power_form_implies_min_form(c0, c1, cl, lam, alpha):
    r = bm_deficits(c0, c1, cl, lam, 2, alpha)
    if r.deficit_power >= 0:
        assert r.deficit_min >= -1e-12
    if alpha >= 1.0 and r.deficit_power >= -1e-2:
        assert r.deficit_min >= -1e-2 - 1e-12


def test_bm_errors():
    with pytest.raises(InvalidArgument):
        check_brunn_minkowski(g.disk(), g.ball((0, 0, 0), 1), 1.0)
    with pytest.raises(InvalidArgument):
        check_brunn_minkowski(g.disk(), g.disk(), 2.0)
    with pytest.raises(InvalidArgument):
        check_brunn_minkowski(g.disk(), g.disk(), 1.0, (1.5,))


def test_bm_solver_error_becomes_record():
    seg = g.polytope([[0, 0], [1, 0]])
    rep = check_brunn_minkowski(seg, g.disk(), 1.0, (0.5,), 200)
    assert not rep.passed
    assert "error" in rep.records[0].details


# -- envelope -----------------------------------------------------------------------


def test_envelope_collapses_for_equal_bodies():
    k = g.disk()
    f = potential_field(solved("disk", 1.0, 200), unit_on_body=True)
    rep = envelope_check(k, k, 0.5, (0.5,), samples=200, fields=(f, f, f))
    assert rep.passed
    # the decomposition x = x1 = x0 is on the search grid, so the envelope never undershoots
    assert abs(rep.records[0].value) <= 1e-2


def test_envelope_vacuous_level():
    k = g.disk()
    f = potential_field(solved("disk", 1.0, 200), unit_on_body=True)
    rep = envelope_check(k, k, 0.5, (1.5,), samples=100, fields=(f, f, f))
    inc = rep.records[1]
    assert inc.passed and inc.details.get("vacuous")


def test_envelope_errors():
    with pytest.raises(InvalidArgument):
        envelope_check(g.disk(), g.disk(), 1.0)
    with pytest.raises(InvalidArgument):
        envelope_check(g.disk(), g.ball((0, 0, 0), 1), 0.5)


# -- continuity ----------------------------------------------------------------------


def test_continuity_on_disk():
    rep = capacity_continuity_check(g.disk(), (0.2, 0.1, 0.05), resolution=300)
    assert rep.passed
    caps = [r.details["capacity"] for r in rep.records if r.case.startswith("eps=")]
    assert caps[0] > caps[1] > caps[2] > caps[3]
    assert caps[3] == solved("disk", 1.0, 300).result.capacity


def test_continuity_scaling():
    a = capacity_continuity_check(g.equilateral_triangle(), (0.2, 0.1), resolution=200)
    b = capacity_continuity_check(g.equilateral_triangle(2.0), (0.4, 0.2), resolution=200)
    for ra, rb in zip(a.records[:3], b.records[:3]):
        assert rb.value == pytest.approx(2 * ra.value, rel=1e-2)


def test_continuity_rejects_bad_epsilons():
    for eps in ((0.1, 0.2), (), (0.1, 0.0)):
        with pytest.raises(InvalidArgument):
            capacity_continuity_check(g.disk(), eps)


# -- isoperimetric ------------------------------------------------------------------


def test_single_ball_first():
    rep = isoperimetric_search([g.disk()], resolutions=(200, 300))
    assert rep.passed


def test_ratio_is_scale_free():
    k = g.equilateral_triangle()
    rep = isoperimetric_search([k, k.scale(3.0)], resolutions=(200, 200), names=["K", "3K"])
    ratios = [r.details["ratio_M_over_cap_root"] for r in rep.records if r.case.startswith("rank")]
    assert ratios[0] == pytest.approx(ratios[1], rel=1e-2)
    # no ball in the family, so the ranking check itself fails
    assert not rep.passed


def test_degenerate_member_recorded():
    rep = isoperimetric_search([g.disk(), g.polytope([[0, 0], [1, 0]])], resolutions=(200, 200))
    bad = [r for r in rep.records if r.case.startswith("body")]
    assert len(bad) == 1 and not bad[0].passed


def test_isoperimetric_errors():
    with pytest.raises(InvalidArgument):
        isoperimetric_search([])
    with pytest.raises(InvalidArgument):
        isoperimetric_search([g.ball((0, 0, 0), 1)], constraint=("perimeter", 1.0))


def test_is_ball():
    assert is_ball(g.disk()) and is_ball(g.ellipsoid((0, 0), (2, 2)))
    assert not is_ball(g.unit_square())
    assert is_ball(g.minkowski_interpolate(g.disk(), g.disk(3), 0.3))


# -- plumbing --------------------------------------------------------------------------


def test_report_pass_is_conjunction():
    ok = Record("a", 0.0, 1.0, True)
    bad = Record("b", 2.0, 1.0, False)
    assert VerificationReport("x", {}, [ok, ok]).passed
    assert not VerificationReport("x", {}, [ok, bad]).passed
    d = VerificationReport("x", {"k": 1}, [ok]).to_dict()
    assert d["pass"] is True and d["records"][0]["case"] == "a"


def test_workers_env(monkeypatch):
    monkeypatch.setenv("RCL_THREADS", "3")
    assert workers() == 3
    monkeypatch.setenv("RCL_THREADS", "0")
    assert workers() == 1
    monkeypatch.setenv("RCL_THREADS", "many")
    with pytest.raises(InvalidArgument):
        workers()
    monkeypatch.delenv("RCL_THREADS")
    assert workers() >= 1


def test_thread_count_does_not_change_results(monkeypatch):
    monkeypatch.setenv("RCL_THREADS", "1")
    a = check_brunn_minkowski(g.unit_square(), g.disk(), 1.0, (0.5,), 150)
    monkeypatch.setenv("RCL_THREADS", "2")
    b = check_brunn_minkowski(g.unit_square(), g.disk(), 1.0, (0.5,), 150)
    assert a.records == b.records
    assert math.isfinite(a.records[0].value)
