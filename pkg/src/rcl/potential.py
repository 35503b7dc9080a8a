"""Riesz potentials of discrete measures, capacitary functions and the
half-space extension used for the 1/2-Laplacian.

A :class:`PotentialField` evaluates ``c * sum_j m_j k(x, cell_j)``. Far from
a cell the kernel is taken at the cell's point; near a cell (closer than a
few cell widths) it is averaged over the cell, i.e. the field is the
potential of the piecewise-constant density the solver worked with. At a
cloud point itself the value is the matching row of the solver matrix.

For ``alpha = 1`` the same measure also defines the harmonic extension to the
upper half-space through the kernel ``(|x - y|^2 + t^2)^(-(N-1)/2)``;
:func:`fractional_laplacian_via_extension` differentiates it in ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial.distance import cdist

from .equilibrium import NEAR_FACTOR, DiscreteMeasure, KernelMatrix, equilibrium
from .errors import InvalidArgument
from .geometry import ConvexBody, PointCloud, circle_directions, contains, fibonacci_sphere, sphere_quadrature
from .quadrature import polygon_extension_potential, polygon_potential

CHUNK = 4096


@dataclass(frozen=True, eq=False)
class PotentialField:
    """``normalization * (mu * |.|^(alpha - N))``.

    ``kernel`` (optional) supplies the self-interaction at cloud points.
    ``body`` is set for capacitary functions; with ``unit_on_body`` the field
    is exactly 1 on the body, as the capacitary function is by definition.
    """

    measure: DiscreteMeasure
    alpha: float
    normalization: float = 1.0
    kernel: KernelMatrix | None = None
    body: ConvexBody | None = None
    unit_on_body: bool = False
    near_factor: float = NEAR_FACTOR

    def __post_init__(self):
        if not self.normalization > 0:
            raise InvalidArgument("normalization must be positive")
        if not 0 < self.alpha < self.dim:
            raise InvalidArgument(f"alpha={self.alpha} outside (0, {self.dim})")

    @property
    def cloud(self) -> PointCloud:
        return self.measure.cloud

    @property
    def dim(self) -> int:
        return self.measure.cloud.dim

    def __call__(self, x) -> np.ndarray:
        return riesz_potential(self, x)


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Harmonic extension of an ``alpha = 1`` field to ``R^N x [0, inf)``."""

    field: PotentialField

    def __post_init__(self):
        if self.field.alpha != 1.0:
            raise InvalidArgument("the half-space extension is defined for alpha = 1 only")

    @property
    def measure(self) -> DiscreteMeasure:
        return self.field.measure

    @property
    def normalization(self) -> float:
        return self.field.normalization

    def __call__(self, x, t) -> np.ndarray:
        return harmonic_extension(self, x, t)


def point_measure(points, masses=None) -> DiscreteMeasure:
    """Measure made of atoms (no cells); masses default to uniform."""
    pts = np.atleast_2d(np.asarray(points, float))
    m = np.full(len(pts), 1.0 / len(pts)) if masses is None else np.asarray(masses, float)
    return DiscreteMeasure(PointCloud(pts, np.ones(len(pts))), m)


def _points(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != dim:
        raise InvalidArgument(f"points must have {dim} coordinates, got {x.shape[1]}")
    return x, single


def _evaluate(field: PotentialField, x: np.ndarray, t: float) -> np.ndarray:
    """``sum_j m_j k_t(x, cell_j)`` with ``k_t(r) = (r^2 + t^2)^(-s/2)``."""
    cloud, m = field.cloud, field.measure.masses
    s = field.dim - field.alpha
    live = m > 0
    y, mj = cloud.points[live], m[live]
    cells = np.flatnonzero(live)
    out = np.empty(len(x))
    self_row = None
    if field.kernel is not None and t == 0:
        self_row = field.kernel.entries @ m
    for a in range(0, len(x), CHUNK):
        xa = x[a:a + CHUNK]
        D = cdist(xa, y)
        R2 = D * D + t * t
        with np.errstate(divide="ignore"):
            K = R2 ** (-0.5 * s)
        near = np.zeros_like(D, bool)
        if cloud.has_cells and field.near_factor > 0:
            # distance in (x, t): high above the body every cell looks like a point
            near = R2 < (field.near_factor * cloud.sizes[cells][None, :]) ** 2
            K[near] = 0.0
        val = K @ mj
        rows, cols = np.nonzero(near)
        if len(rows):
            val += np.bincount(rows, mj[cols] * _cell_average(cloud, cells[cols], xa[rows], s, t), len(xa))
        if t == 0:
            hit_r, hit_c = np.nonzero(D == 0)
            for r, c in zip(hit_r, hit_c):
                j = cells[c]
                if self_row is not None:
                    val[r] = self_row[j]
                elif not cloud.has_cells:
                    val[r] = np.inf
        out[a:a + CHUNK] = val
    return out


def _cell_average(cloud: PointCloud, j: np.ndarray, x: np.ndarray, s: float, t: float) -> np.ndarray:
    """Mean of the kernel over cell ``j[k]`` seen from ``x[k]``, pair by pair."""
    w = cloud.weights[j]
    polys = cloud.polygon_array
    if polys is not None and (t == 0 or s == 1.0):
        if t == 0:
            return polygon_potential(x, polys[j], s) / w
        return polygon_extension_potential(x, polys[j], t) / w
    qp, qw = cloud.quad_points[j], cloud.quad_weights[j]
    R2 = np.sum((qp - x[:, None, :]) ** 2, axis=-1) + t * t
    with np.errstate(divide="ignore"):
        K = np.where(R2 > 0, R2, np.inf) ** (-0.5 * s)
    return np.sum(K * qw, axis=1) / w


def riesz_potential(field: PotentialField, x) -> np.ndarray | float:
    """Field value at a point or at each row of an array of points."""
    pts, single = _points(x, field.dim)
    v = field.normalization * _evaluate(field, pts, 0.0)
    if field.unit_on_body and field.body is not None:
        v[contains(field.body, pts)] = 1.0
    return float(v[0]) if single else v


def harmonic_extension(ext: ExtensionField | PotentialField, x, t) -> np.ndarray | float:
    """``V(x, t) = c * sum_j m_j (|x - y_j|^2 + t^2)^(-(N-1)/2)``; even in ``t``.

    Built from the measure alone: ``unit_on_body`` is ignored, so at
    ``t = 0`` this is the unclamped :func:`riesz_potential`.
    """
    if isinstance(ext, PotentialField):
        ext = ExtensionField(ext)
    field = ext.field
    pts, single = _points(x, field.dim)
    t = abs(float(t))
    v = field.normalization * _evaluate(field, pts, t)
    return float(v[0]) if single else v


def potential_field(eq, normalized: bool = True, unit_on_body: bool = False) -> PotentialField:
    """Field of a solved :class:`~rcl.equilibrium.Equilibrium`.

    ``normalized`` divides by the energy, giving the capacitary function.
    """
    c = 1.0 / eq.result.energy if normalized else 1.0
    return PotentialField(eq.measure, eq.result.alpha, c, eq.kernel, eq.body, unit_on_body)


def capacitary_function(body: ConvexBody, resolution: int | None = None, unit_on_body: bool = False,
                        alpha: float = 1.0) -> PotentialField:
    """``v_K = v / I(K)``, equal to 1 on K up to the discrete plateau."""
    return potential_field(equilibrium(body, alpha, resolution), True, unit_on_body)


def measure_center(field: PotentialField) -> np.ndarray:
    return field.measure.masses @ field.cloud.points


def decay_probe(field: PotentialField, radii, directions: int = 64, center=None):
    """``(r, r^(N - alpha) * mean_{|x - c| = r} v(x))`` for each radius.

    For a capacitary function the scaled values tend to the capacity. The
    centre defaults to the barycentre of the measure.
    """
    radii = np.asarray(radii, float)
    if np.any(np.diff(radii) <= 0):
        raise InvalidArgument("radii must be strictly increasing")
    c = measure_center(field) if center is None else np.asarray(center, float)
    reach = float(np.max(np.linalg.norm(field.cloud.points - c, axis=1)))
    if radii[0] <= 2.0 * reach:
        raise InvalidArgument(f"radius {radii[0]:g} inside twice the cloud's bounding radius {reach:.4g}")
    dirs = circle_directions(directions) if field.dim == 2 else fibonacci_sphere(directions)
    q = field.dim - field.alpha
    out = []
    for r in radii:
        v = riesz_potential(field, c + r * dirs)
        out.append((float(r), float(r**q * np.mean(v))))
    return out


# -- the 1/2-Laplacian through the extension ------------------------------------


def poisson_extension(f: Callable, x, t: float, dim: int, radius: float = 50.0,
                      radial_panels: int = 48, sphere_order: int = 48) -> float:
    """``U(x, t)`` for the Poisson extension of a callable ``f`` on ``R^dim``.

    ``f`` takes an ``(M, dim)`` array. ``U - f(x)`` is integrated in the
    scaled radius ``rho = |y - x| / t``: Gauss on ``[0, 1]``, composite Gauss
    in ``log rho`` up to ``radius / t`` and a tail with the outermost
    spherical mean held fixed.
    """
    x = np.asarray(x, float)
    fx = float(np.asarray(f(x[None, :])).ravel()[0])
    if t == 0:
        return fx
    t = abs(t)
    nodes, sw = sphere_quadrature(dim, sphere_order if dim == 2 else sphere_order // 2)
    area = sw.sum()
    cN = math.gamma((dim + 1) / 2) / math.pi ** ((dim + 1) / 2)

    def weight(rho):
        return rho ** (dim - 1) / (rho * rho + 1.0) ** ((dim + 1) / 2)

    def excess(rho):
        pts = x[None, None, :] + t * rho[:, None, None] * nodes[None, :, :]
        vals = np.asarray(f(pts.reshape(-1, dim)), float).reshape(len(rho), -1)
        return vals @ sw / area - fx

    gx, gw = np.polynomial.legendre.leggauss(16)
    rho0 = 0.5 * (gx + 1.0)
    total = np.sum(0.5 * gw * weight(rho0) * excess(rho0))
    rho_max = max(radius / t, 2.0)
    edges = np.linspace(0.0, math.log(rho_max), radial_panels + 1)
    u = (0.5 * (edges[1:] - edges[:-1])[:, None] * (gx + 1.0) + edges[:-1, None]).ravel()
    du = np.repeat(0.5 * np.diff(edges), len(gx)) * np.tile(gw, radial_panels)
    rho = np.exp(u)
    total += np.sum(du * rho * weight(rho) * excess(rho))
    tail = integrate.quad(weight, rho_max, np.inf)[0]
    total += tail * excess(np.array([rho_max]))[0]
    return fx + cN * area * total


def _extrapolate(h: np.ndarray, d: np.ndarray) -> float:
    """Polynomial (Richardson) extrapolation of ``d(h)`` to ``h = 0``."""
    if len(h) == 1:
        return float(d[0])
    scale = h.max()
    coef = np.polyfit(h / scale, d, len(h) - 1)
    return float(coef[-1])


def spectral_fractional_laplacian(f: Callable, dim: int, box: float = 10.0, n: int = 256,
                                  order: float = 0.5) -> Callable:
    """``(-Delta)^order f`` on the periodic box ``[-box/2, box/2)^dim`` via the FFT.

    Returns a function evaluating the result at grid points (nearest node).
    """
    g = box * (np.arange(n) / n - 0.5)
    mesh = np.meshgrid(*([g] * dim), indexing="ij")
    pts = np.stack([c.ravel() for c in mesh], axis=1)
    vals = np.asarray(f(pts), float).reshape((n,) * dim)
    k = 2 * np.pi * np.fft.fftfreq(n, d=box / n)
    kk = np.meshgrid(*([k] * dim), indexing="ij")
    mult = np.sqrt(sum(c * c for c in kk)) ** (2 * order)
    res = np.real(np.fft.ifftn(mult * np.fft.fftn(vals)))

    def at(x):
        idx = np.rint((np.asarray(x, float) / box + 0.5) * n).astype(int) % n
        return float(res[tuple(idx)])

    return at


def gaussian(x) -> np.ndarray:
    x = np.atleast_2d(x)
    return np.exp(-np.sum(x * x, axis=1))


@dataclass(frozen=True)
class ExtensionCalibration:
    """Relation between ``lim dU/dt`` and the spectral ``(-Delta)^(1/2)``."""

    sign: float
    raw_limit: float
    spectral_value: float
    ratio: float


@lru_cache(maxsize=1)
def extension_calibration() -> ExtensionCalibration:
    """Fix the sign of the ``t``-derivative once, on a Gaussian in the plane."""
    raw = _raw_limit(gaussian, np.zeros(2), (0.2, 0.1, 0.05), 2)
    spec = spectral_fractional_laplacian(gaussian, 2)(np.zeros(2))
    ratio = spec / raw
    return ExtensionCalibration(float(np.sign(ratio)), raw, spec, ratio)


def _raw_limit(target, x, hs, dim) -> float:
    hs = np.asarray(hs, float)
    if isinstance(target, PotentialField):
        ext = ExtensionField(target)
        u0 = harmonic_extension(ext, x, 0.0)
        d = np.array([(harmonic_extension(ext, x, h) - u0) / h for h in hs])
    else:
        f0 = float(np.asarray(target(x[None, :])).ravel()[0])
        d = np.array([(poisson_extension(target, x, h, dim) - f0) / h for h in hs])
    return _extrapolate(hs, d)


def fractional_laplacian_via_extension(target, x, h_sequence=(0.2, 0.1, 0.05)) -> float:
    """``(-Delta)^(1/2) f (x)`` from one-sided ``t``-differences of the extension.

    ``target`` is an ``alpha = 1`` :class:`PotentialField` or a callable on
    ``(M, N)`` arrays (then ``x`` fixes ``N``). The difference quotients
    ``(U(x, h) - U(x, 0)) / h`` are extrapolated to ``h = 0`` and multiplied
    by the sign from :func:`extension_calibration`.
    """
    hs = np.asarray(h_sequence, float)
    if len(hs) == 0 or np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise InvalidArgument("h_sequence must be positive and strictly decreasing")
    x = np.asarray(x, float).ravel()
    return extension_calibration().sign * _raw_limit(target, x, hs, len(x))
