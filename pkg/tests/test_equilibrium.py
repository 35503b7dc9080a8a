import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import grid_bound, grid_minimum, random_kernel, support_enumeration_minimum
from conftest import golden, solved
from rcl import geometry as g
from rcl.equilibrium import (MAX_DENSE, KernelMatrix, assemble_kernel, ball_energy, capacity, equilibrium,
                             kkt_residual, solve_equilibrium, support_mode)
from rcl.errors import DegenerateBodyError, DuplicatePointError, InvalidArgument, SolverError
from rcl.geometry import PointCloud
from rcl.quadrature import cube_self_energy

# -- kernel ------------------------------------------------------------------------


@given(st.floats(0.01, 10), st.floats(0.1, 1.9))
def test_two_point_off_diagonal(d, alpha):
    cloud = PointCloud(np.array([[0.0, 0.0], [d, 0.0]]), np.full(2, 1e-6))
    A = assemble_kernel(cloud, alpha).entries
    assert A[0, 1] == pytest.approx(d ** (alpha - 2), rel=1e-14)
    assert A[1, 0] == A[0, 1]


@given(st.floats(0.1, 10))
def test_kernel_homogeneity(r):
    rng = np.random.default_rng(0)
    pts = rng.random((20, 3))
    A = assemble_kernel(PointCloud(pts, np.full(20, 1e-6)), 1.5).entries
    B = assemble_kernel(PointCloud(r * pts, np.full(20, 1e-6)), 1.5).entries
    off = ~np.eye(20, dtype=bool)
    assert np.allclose(B[off], r ** (1.5 - 3) * A[off], rtol=1e-13)


def test_uniform_grid_diagonal_matches_monte_carlo_cell_energy():
    h, alpha = 0.1, 1.0
    x = np.arange(4) * h
    pts = np.stack(np.meshgrid(x, x), -1).reshape(-1, 2)
    A = assemble_kernel(PointCloud(pts, np.full(len(pts), h * h)), alpha).entries
    rng = np.random.default_rng(5)
    r = np.linalg.norm(rng.random((2_000_000, 2)) - rng.random((2_000_000, 2)), axis=1) * h
    mc = np.mean(r ** (alpha - 2))
    se = np.std(r ** (alpha - 2)) / math.sqrt(len(r))
    assert np.allclose(np.diag(A), cube_self_energy(2, 2 - alpha) * h ** (alpha - 2))
    assert abs(A[0, 0] - mc) < 4 * se


def test_lattice_kernel_invariants(square_eq):
    A = square_eq.kernel.entries
    assert np.max(np.abs(A - A.T)) <= 1e-14 * np.max(np.abs(A))
    assert np.all(A > 0) and np.all(np.isfinite(np.diag(A)))


def test_kernel_errors():
    with pytest.raises(DuplicatePointError):
        assemble_kernel(PointCloud(np.zeros((2, 2)), np.ones(2)), 1.0)
    for alpha in (0.0, 2.0, -1.0):
        with pytest.raises(InvalidArgument):
            assemble_kernel(PointCloud(np.eye(2), np.ones(2)), alpha)
    big = PointCloud(np.random.default_rng(0).random((MAX_DENSE + 1, 2)), np.ones(MAX_DENSE + 1))
    with pytest.raises(InvalidArgument, match="dense"):
        assemble_kernel(big, 1.0)


# -- solver --------------------------------------------------------------------------


def _kernel(A, alpha=1.0, dim=2):
    return KernelMatrix(np.asarray(A, float), alpha, dim, "test")


def test_two_point_symmetric_split():
    cloud = PointCloud(np.array([[0.0, 0.0], [1.0, 0.0]]), np.full(2, 0.01))
    m, res = solve_equilibrium(assemble_kernel(cloud, 1.0))
    assert np.allclose(m.masses, 0.5, atol=1e-15)
    assert res.capacity * res.energy == pytest.approx(1.0, abs=1e-14)


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_minimiser_beats_uniform_and_certifies(n, seed):
    A = random_kernel(n, 2, 1.0, np.random.default_rng(seed))
    m, res = solve_equilibrium(_kernel(A))
    u = np.full(n, 1 / n)
    assert res.energy <= u @ A @ u + 1e-12
    assert np.all(m.masses >= 0) and abs(m.masses.sum() - 1) <= 1e-10
    assert kkt_residual(A, m.masses) <= 1e-7
    assert res.energy == pytest.approx(support_enumeration_minimum(A), rel=1e-12)


@pytest.mark.parametrize("seed", [1, 2])
def test_grid_oracle_small(seed):
    A = random_kernel(4, 2, 1.0, np.random.default_rng(seed))
    _, res = solve_equilibrium(_kernel(A))
    gap = grid_minimum(A) - res.energy
    assert -1e-12 <= gap <= grid_bound(A)


def test_sparse_support_found():
    # the middle of three collinear atoms is shielded when the outer two are close to it
    pts = np.array([[0.0, 0.0], [0.05, 0.0], [0.1, 0.0]])
    A = assemble_kernel(PointCloud(pts, np.full(3, 0.01)), 1.0).entries
    m, res = solve_equilibrium(_kernel(A))
    assert res.energy == pytest.approx(support_enumeration_minimum(A), rel=1e-12)
    assert kkt_residual(A, m.masses) <= 1e-7


def test_frank_wolfe_agrees():
    A = random_kernel(8, 2, 1.0, np.random.default_rng(4))
    _, a = solve_equilibrium(_kernel(A))
    _, f = solve_equilibrium(_kernel(A), method="frank-wolfe", tol=1e-9)
    assert f.energy == pytest.approx(a.energy, rel=1e-8)


def test_budget_exhaustion_carries_best_iterate():
    A = random_kernel(10, 2, 1.0, np.random.default_rng(7))
    with pytest.raises(SolverError) as info:
        solve_equilibrium(_kernel(A), method="frank-wolfe", max_iter=3, tol=1e-14)
    err = info.value
    assert err.masses is not None and abs(err.masses.sum() - 1) < 1e-10
    assert err.residual > 0 and err.iterations == 3


def test_unknown_method():
    with pytest.raises(InvalidArgument):
        solve_equilibrium(_kernel(np.eye(2)), method="newton")


# -- pipeline -----------------------------------------------------------------------


def test_disk_reference_constant(disk_eq):
    ref = golden("disk_reference.json")
    assert disk_eq.result.capacity == pytest.approx(ref["capacity"], rel=1e-2)
    assert ref["self_consistency"] <= 5e-3
    e = ref["energies"]
    assert e[0] > e[1] > e[2]


def test_reference_against_closed_form():
    ref = golden("disk_reference.json")
    assert ref["energy"] == pytest.approx(ball_energy(2, 1.0), rel=1e-3)
    assert ball_energy(2, 1.0) == pytest.approx(math.pi / 2)
    assert ball_energy(3, 2.0, 2.0) == pytest.approx(0.5)


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_capacity_scaling(r):
    base = solved("triangle").result.capacity
    scaled = capacity(g.equilateral_triangle().scale(r), 1.0, 500).capacity
    assert scaled / base == pytest.approx(r, rel=5e-3)


def test_translation_invariance(square_eq):
    moved = capacity(g.unit_square().translate((3.25, -1.5)), 1.0, 500)
    assert moved.capacity == pytest.approx(square_eq.result.capacity, rel=1e-7)


def test_monotone_under_inclusion(square_eq, disk_eq):
    inner = capacity(g.disk(0.45), 1.0, 500).capacity
    sq = square_eq.result.capacity
    assert inner <= sq + 1e-7
    assert sq <= disk_eq.result.capacity + 1e-7


def test_certificate_on_bodies(square_eq):
    r = square_eq.result
    assert r.kkt_residual <= 1e-7
    assert r.plateau_deviation <= 2e-2
    assert abs(square_eq.measure.masses.sum() - 1) <= 1e-10


def test_deterministic():
    a = equilibrium(g.equilateral_triangle(), 1.0, 200)
    b = equilibrium(g.equilateral_triangle(), 1.0, 200)
    assert np.array_equal(a.measure.masses, b.measure.masses)
    assert a.result.energy == b.result.energy


def test_support_mode():
    assert support_mode(2, 1.0) == "interior"
    assert support_mode(3, 1.0) == "interior"
    assert support_mode(3, 2.0) == "boundary"
    assert support_mode(3, 2.5) == "boundary"


def test_newtonian_ball_boundary():
    eq = equilibrium(g.ball((0, 0, 0), 1.0), 2.0, 1000)
    assert eq.result.mode == "boundary"
    assert eq.result.energy == pytest.approx(ball_energy(3, 2.0), rel=1e-2)


def test_pipeline_errors():
    with pytest.raises(DegenerateBodyError):
        capacity(g.polytope([[0, 0], [1, 0]]), 1.0, 100)
    with pytest.raises(InvalidArgument):
        capacity(g.disk(), 2.0, 100)
