"""Discrete Riesz energy on a point cloud and its minimisation over the simplex.

The energy of masses ``m`` (``m >= 0``, ``sum m = 1``) on cells of a cloud is
``m^T A m`` with ``A_ij ~ |x_i - x_j|^(alpha - N)``. Diagonal entries are the
average self-interaction of a uniform cell; pairs of nearby cells use the
cell-averaged kernel, so ``A`` is the Galerkin matrix of piecewise-constant
densities up to far-field midpoint rules.

Minimising over the simplex is the same as solving ``min 1/2 x^T A x - 1^T x``
over ``x >= 0`` and normalising: ``m = x / sum(x)``, ``I = 1 / sum(x)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .errors import DegenerateBodyError, DuplicatePointError, InvalidArgument, SolverError
from .geometry import ConvexBody, PointCloud, sample_points
from .quadrature import cube_self_energy, planar_coordinates, polygon_potential, polygon_self_energy

log = logging.getLogger(__name__)

MAX_DENSE = 5000
NEAR_FACTOR = 2.5
DEFAULT_RESOLUTION = {2: 500, 3: 2000}


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    entries: np.ndarray
    alpha: float
    dimension: int
    diagonal_rule: str
    cloud: PointCloud | None = None
    near_pairs: int = 0

    @property
    def exponent(self) -> float:
        return self.dimension - self.alpha

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    cloud: PointCloud
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, float)
        if len(m) != len(self.cloud):
            raise InvalidArgument("one mass per cloud point required")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-10:
            raise InvalidArgument("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "masses", m)

    @property
    def support(self) -> np.ndarray:
        return self.masses > 0


@dataclass(frozen=True)
class CapacityResult:
    energy: float
    capacity: float
    alpha: float
    resolution: int
    kkt_residual: float
    iterations: int
    n_points: int = 0
    mode: str = "interior"
    plateau_deviation: float = 0.0
    method: str = "active-set"
    extras: dict = field(default_factory=dict)


def _check_alpha(alpha: float, dim: int):
    if not 0.0 < alpha < dim:
        raise InvalidArgument(f"alpha={alpha} outside (0, N) for N={dim}")


def assemble_kernel(cloud: PointCloud, alpha: float, near_factor: float = NEAR_FACTOR) -> KernelMatrix:
    """Riesz interaction matrix of a cloud (per unit mass)."""
    n, dim = len(cloud), cloud.dim
    _check_alpha(alpha, dim)
    if n > MAX_DENSE:
        raise InvalidArgument(f"{n} points exceed the dense-matrix limit of {MAX_DENSE}")
    s = dim - alpha
    d = cloud.cell_dim
    if s >= d:
        raise InvalidArgument(
            f"kernel |x-y|^-{s:g} is not integrable on {d}-dimensional cells; "
            f"{cloud.mode} sampling cannot carry alpha={alpha:g} in R^{dim}")
    D = cdist(cloud.points, cloud.points)
    np.fill_diagonal(D, np.inf)
    if np.any(D == 0):
        i, j = np.argwhere(D == 0)[0]
        raise DuplicatePointError(f"points {i} and {j} coincide")
    A = D ** (-s)
    diag, rule = _self_energies(cloud, s)
    near = 0
    if cloud.has_cells and near_factor > 0 and cloud.spacing > 0:
        near = _near_field(cloud, s, D, A, near_factor)
        rule += f"; cell-averaged kernel for pairs closer than {near_factor:g} cell widths"
    np.fill_diagonal(A, diag)
    A = 0.5 * (A + A.T)
    return KernelMatrix(A, float(alpha), dim, rule, cloud, near)


def _self_energies(cloud: PointCloud, s: float):
    """Average self-interaction of each cell, per unit mass squared."""
    w, d = cloud.weights, cloud.cell_dim
    if not cloud.has_cells:
        c = cube_self_energy(d, s)
        return c * w ** (-s / d), f"uniform {d}-cube cell of measure w: c(s,{d}) w^(-s/{d})"
    out = np.empty(len(cloud))
    full = cloud.full if cloud.full is not None else np.zeros(len(cloud), bool)
    if np.any(full):
        h = cloud.sizes[full]
        out[full] = cube_self_energy(d, s) * h ** (2 * d - s) / w[full] ** 2
    rest = np.flatnonzero(~full)
    if cloud.polygons is not None and d == 2:
        for k in rest:
            poly = cloud.polygons[k]
            if cloud.dim == 3:
                poly = planar_coordinates(poly)
            out[k] = polygon_self_energy(poly, s) / w[k] ** 2
        rule = "exact cell self-energy (closed form for lattice squares, polar quadrature for cut cells)"
    elif d == 1:
        out[rest] = cube_self_energy(1, s) * w[rest] ** (-s)
        rule = "closed-form segment self-energy"
    else:
        # partial cubes: Galerkin sum over sub-cubes
        sub_c = cube_self_energy(d, s)
        for k in rest:
            qw = cloud.quad_weights[k]
            live = qw > 0
            p, q = cloud.quad_points[k][live], qw[live]
            hs = q[0] ** (1.0 / d)
            R = cdist(p, p)
            np.fill_diagonal(R, np.inf)
            tot = q @ (R ** (-s)) @ q + len(q) * sub_c * hs ** (2 * d - s)
            out[k] = tot / w[k] ** 2
        rule = "closed-form cube self-energy; partial cells summed over sub-cubes"
    return out, rule


def _near_field(cloud: PointCloud, s: float, D: np.ndarray, A: np.ndarray, factor: float) -> int:
    size = cloud.sizes
    ii, jj = np.nonzero(np.triu(D < factor * np.maximum(size[:, None], size[None, :]), 1))
    if len(ii) == 0:
        return 0
    w = cloud.weights
    if cloud.polygons is not None and cloud.cell_dim == 2 and cloud.dim == 2:
        # exact potential of cell j integrated against the rule of cell i
        one_sided = {}
        pairs = np.concatenate([np.stack([ii, jj], 1), np.stack([jj, ii], 1)])
        order = np.argsort(pairs[:, 1], kind="stable")
        pairs = pairs[order]
        splits = np.flatnonzero(np.diff(pairs[:, 1])) + 1
        for grp in np.split(pairs, splits):
            j = grp[0, 1]
            src = grp[:, 0]
            qp = cloud.quad_points[src].reshape(-1, 2)
            phi = polygon_potential(qp, cloud.polygons[j], s).reshape(len(src), -1)
            vals = np.sum(phi * cloud.quad_weights[src], axis=1) / (w[src] * w[j])
            for i, v in zip(src, vals):
                one_sided[(i, j)] = v
        for i, j in zip(ii, jj):
            A[i, j] = A[j, i] = 0.5 * (one_sided[(i, j)] + one_sided[(j, i)])
        return len(ii)
    qp, qw = cloud.quad_points, cloud.quad_weights
    chunk = max(1, 200_000 // (qw.shape[1] ** 2))
    for a in range(0, len(ii), chunk):
        bi, bj = ii[a:a + chunk], jj[a:a + chunk]
        R = np.linalg.norm(qp[bi][:, :, None, :] - qp[bj][:, None, :, :], axis=-1)
        K = np.where(R > 0, R, np.inf) ** (-s)
        vals = np.einsum("pa,pab,pb->p", qw[bi], K, qw[bj]) / (w[bi] * w[bj])
        A[bi, bj] = vals
        A[bj, bi] = vals
    return len(ii)


def kkt_residual(A: np.ndarray, masses: np.ndarray) -> float:
    """Relative Frostman residual of masses on the simplex."""
    pot = A @ masses
    c = float(masses @ pot)
    supp = masses > 0
    on = np.max(np.abs(pot[supp] - c)) if np.any(supp) else np.inf
    off = np.max(np.maximum(c - pot[~supp], 0.0)) if np.any(~supp) else 0.0
    return float(max(on, off) / c)


def plateau_deviation(A: np.ndarray, masses: np.ndarray) -> float:
    pot = A @ masses
    c = float(masses @ pot)
    return float(np.max(np.abs(pot[masses > 0] - c)) / c)


def _solve_spd(A, rhs):
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, check_finite=False), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.solve(A, rhs, assume_a="sym", check_finite=False)


def _active_set(A: np.ndarray, tol: float, max_iter: int):
    """Primal active-set method for ``min 1/2 x^T A x - 1^T x, x >= 0``.

    Starts from the full support (the interior optimum is the common case),
    drops indices by ratio tests and re-adds the most violated one.
    """
    n = len(A)
    P = np.ones(n, bool)
    blocked = np.zeros(n, bool)
    x = np.full(n, n / A.sum())
    it = 0
    while True:
        while True:
            it += 1
            if it > max_iter:
                raise SolverError("active-set iteration budget exhausted", x / x.sum(),
                                  kkt_residual(A, x / x.sum()), it)
            idx = np.flatnonzero(P)
            z = np.zeros(n)
            z[idx] = _solve_spd(A[np.ix_(idx, idx)], np.ones(len(idx)))
            bad = P & (z <= 0)
            if not np.any(bad):
                x = z
                break
            step = np.min(x[bad] / (x[bad] - z[bad]))
            x = x + step * (z - x)
            drop = P & (x <= 1e-14 * np.max(x))
            drop[np.flatnonzero(bad)[np.argmin(x[bad])]] = True
            blocked |= drop & ~P  # never true; kept for symmetry of intent
            P &= ~drop
            x[~P] = 0.0
        g = A @ x - 1.0
        cand = np.flatnonzero(~P & ~blocked & (g < -0.1 * tol))
        if len(cand) == 0:
            return x / x.sum(), it
        j = cand[np.argmin(g[cand])]
        P[j] = True
        # a re-added index that comes straight back nonpositive is numerically stuck
        trial = np.zeros(n)
        idx = np.flatnonzero(P)
        trial[idx] = _solve_spd(A[np.ix_(idx, idx)], np.ones(len(idx)))
        if trial[j] <= 0:
            P[j] = False
            blocked[j] = True


def _frank_wolfe(A: np.ndarray, tol: float, max_iter: int):
    """Away-step Frank-Wolfe with exact line search on ``m^T A m``."""
    n = len(A)
    m = np.full(n, 1.0 / n)
    Am = A @ m
    diag = np.diag(A)
    best, best_res = m.copy(), np.inf
    for it in range(1, max_iter + 1):
        c = m @ Am
        s_idx = int(np.argmin(Am))
        supp = np.flatnonzero(m > 0)
        v_idx = int(supp[np.argmax(Am[supp])])
        gap_fw = c - Am[s_idx]
        gap_away = Am[v_idx] - c
        if it % 50 == 0 or max(gap_fw, gap_away) <= 0.5 * tol * c:
            res = kkt_residual(A, m)
            if res < best_res:
                best, best_res = m.copy(), res
            if res <= tol:
                return m, it
        if gap_fw >= gap_away:
            # d = e_s - m
            dAd = diag[s_idx] - 2 * Am[s_idx] + c
            gmax = 1.0
            slope = Am[s_idx] - c
            gamma = min(gmax, max(0.0, -slope / dAd)) if dAd > 0 else gmax
            m *= 1 - gamma
            m[s_idx] += gamma
            Am = (1 - gamma) * Am + gamma * A[:, s_idx]
        else:
            # d = m - e_v
            dAd = c - 2 * Am[v_idx] + diag[v_idx]
            gmax = m[v_idx] / (1 - m[v_idx]) if m[v_idx] < 1 else np.inf
            slope = c - Am[v_idx]
            gamma = min(gmax, max(0.0, -slope / dAd)) if dAd > 0 else gmax
            m *= 1 + gamma
            m[v_idx] -= gamma
            Am = (1 + gamma) * Am - gamma * A[:, v_idx]
            if gamma == gmax:
                m[v_idx] = 0.0
        m[m < 0] = 0.0
    raise SolverError("Frank-Wolfe iteration budget exhausted", best / best.sum(), best_res, max_iter)


def solve_equilibrium(kernel: KernelMatrix, tol: float = 1e-7, max_iter: int = 100_000,
                      method: str = "active-set"):
    """Minimise ``m^T A m`` over the probability simplex.

    Returns ``(DiscreteMeasure, CapacityResult)``. ``method`` is
    ``"active-set"`` (exact solves on the working support) or
    ``"frank-wolfe"`` (away steps, linear convergence on well-conditioned
    problems). Raises :class:`SolverError` when ``max_iter`` is exhausted or
    the KKT residual stays above ``tol``.
    """
    A = kernel.entries
    if method == "active-set":
        m, it = _active_set(A, tol, max_iter)
    elif method == "frank-wolfe":
        m, it = _frank_wolfe(A, tol, max_iter)
    else:
        raise InvalidArgument(f"unknown solver method {method!r}")
    m = np.where(m > 0, m, 0.0)
    m /= m.sum()
    res = kkt_residual(A, m)
    if res > tol:
        raise SolverError(f"KKT residual {res:.3e} above tolerance {tol:.1e}", m, res, it)
    energy = float(m @ A @ m)
    cloud = kernel.cloud if kernel.cloud is not None else PointCloud(np.zeros((len(m), kernel.dimension)),
                                                                     np.ones(len(m)))
    measure = DiscreteMeasure(cloud, m)
    result = CapacityResult(energy, 1.0 / energy, kernel.alpha, len(m), res, it, len(m),
                            cloud.mode, plateau_deviation(A, m), method)
    return measure, result


def support_mode(dim: int, alpha: float) -> str:
    """Where the equilibrium measure lives: on the boundary iff ``alpha >= 2``.

    For ``alpha < 2`` the kernel exponent ``N - alpha`` exceeds ``N - 2`` and
    the equilibrium measure of a body charges its interior; for
    ``alpha >= 2`` it sits on the boundary (the Newtonian case ``alpha = 2``
    included).
    """
    return "boundary" if alpha >= 2.0 else "interior"


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """Everything a capacity solve produces."""

    body: ConvexBody
    measure: DiscreteMeasure
    result: CapacityResult
    kernel: KernelMatrix


def equilibrium(body: ConvexBody, alpha: float, resolution: int | None = None, tol: float = 1e-7,
                method: str = "active-set") -> Equilibrium:
    _check_alpha(alpha, body.dim)
    if body.degenerate:
        raise DegenerateBodyError(f"{body.kind} body has empty interior; its capacity is not computed")
    if resolution is None:
        resolution = DEFAULT_RESOLUTION.get(body.dim, 500)
    mode = support_mode(body.dim, alpha)
    cloud = sample_points(body, mode, resolution)
    kernel = assemble_kernel(cloud, alpha)
    measure, res = solve_equilibrium(kernel, tol=tol, method=method)
    res = CapacityResult(res.energy, res.capacity, res.alpha, resolution, res.kkt_residual, res.iterations,
                         res.n_points, mode, res.plateau_deviation, res.method)
    log.debug("capacity %s alpha=%g n=%d -> %.10g", body.kind, alpha, len(cloud), res.capacity)
    return Equilibrium(body, measure, res, kernel)


def capacity(body: ConvexBody, alpha: float, resolution: int | None = None, **kw) -> CapacityResult:
    """``Cap_alpha(K) = 1 / I_alpha(K)`` from the discretised energy."""
    return equilibrium(body, alpha, resolution, **kw).result


def ball_energy(dim: int, alpha: float, radius: float = 1.0) -> float:
    """Closed-form ``I_alpha`` of a ball, valid for ``0 < alpha <= 2``.

    Uses the equilibrium density ``(r^2 - |x|^2)^(-alpha/2)``:
    ``I = Gamma(alpha/2) Gamma((N - alpha)/2 + 1) / Gamma(N/2) * r^(alpha - N)``.
    """
    if not (0 < alpha <= 2 and alpha < dim):
        raise InvalidArgument("closed form needs 0 < alpha <= 2 and alpha < N")
    return (math.gamma(alpha / 2) * math.gamma((dim - alpha) / 2 + 1) / math.gamma(dim / 2)
            * radius ** (alpha - dim))
