"""Independent brute-force minimisers of ``m^T A m`` over the probability simplex."""

import itertools
from functools import lru_cache

import numpy as np

from rcl.equilibrium import assemble_kernel
from rcl.geometry import PointCloud

GRID_STEP = 0.02


@lru_cache(maxsize=None)
def compositions(k: int, n: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``n`` summing to ``k``."""
    if n == 1:
        return np.array([[k]], dtype=np.int16)
    parts = []
    for first in range(k + 1):
        rest = compositions(k - first, n - 1)
        parts.append(np.hstack([np.full((len(rest), 1), first, np.int16), rest]))
    return np.vstack(parts)


def grid_minimum(A: np.ndarray, step: float = GRID_STEP) -> float:
    k, n = int(round(1 / step)), len(A)
    best = np.inf
    for first in range(k + 1):
        rest = compositions(k - first, n - 1)
        M = np.hstack([np.full((len(rest), 1), first, float), rest]) * step
        best = min(best, float(np.min(np.einsum("ij,jk,ik->i", M, A, M))))
    return best


def grid_bound(A: np.ndarray, step: float = GRID_STEP) -> float:
    """Rounding the optimum to the grid moves each coordinate by at most ``step``
    and keeps its zeros, so the linear term vanishes and the loss is at most
    ``lambda_max * n * step^2``."""
    return float(np.linalg.eigvalsh(A)[-1] * len(A) * step * step)


def support_enumeration_minimum(A: np.ndarray) -> float:
    """Exact minimum: on each support S the stationary point is ``A_S^-1 1``
    normalised; keep the feasible ones."""
    n = len(A)
    best = np.inf
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            S = list(S)
            try:
                z = np.linalg.solve(A[np.ix_(S, S)], np.ones(r))
            except np.linalg.LinAlgError:
                continue
            if np.all(z > 0):
                m = z / z.sum()
                best = min(best, float(m @ A[np.ix_(S, S)] @ m))
    return best


def random_kernel(n: int, dim: int, alpha: float, rng) -> np.ndarray:
    """Kernel of a random cloud with random cell measures, redrawn until positive definite."""
    while True:
        pts = rng.random((n, dim))
        # larger cells lower the diagonal and push mass off interior points
        w = rng.uniform(0.2, 1.0, n) * rng.choice([0.05, 0.3]) ** dim
        A = assemble_kernel(PointCloud(pts, w), alpha).entries
        if np.linalg.eigvalsh(A)[0] > 0:
            return A
