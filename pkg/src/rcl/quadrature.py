"""Singular cell integrals of the Riesz kernel ``|x - y|^-s``.

Everything here works per unit cell geometry; callers scale the results.
The two workhorses are

* :func:`cube_self_energy` -- the double integral of the kernel over a unit
  d-cube, by a Duffy split of the difference domain and Gauss-Jacobi in the
  radial variable (the singular factor is absorbed into the weight);
* :func:`polygon_potential` -- the exact single-layer integral of the kernel
  over a planar polygon at arbitrary points, from a signed fan of triangles
  with apex at the evaluation point.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special
from scipy.special import roots_sh_jacobi

_GL_INNER = np.polynomial.legendre.leggauss(12)
_GL_OUTER = np.polynomial.legendre.leggauss(20)


@lru_cache(maxsize=64)
def cube_self_energy(d: int, s: float, order: int = 24) -> float:
    """Return the integral of ``|x - y|^-s`` over ``[0,1]^d x [0,1]^d``.

    Requires ``0 <= s < d``. Scales as ``h^(2d - s)`` for a cube of side h.
    """
    if not 0 <= s < d:
        raise ValueError(f"kernel exponent {s} not integrable on a {d}-cube")
    # radial part: z^(d-1-s) is the Jacobi weight, the rest is polynomial in z
    z, wz = roots_sh_jacobi(d + 1, d - s, d - s)
    if d == 1:
        return float(2.0 * np.sum(wz * (1.0 - z)))
    x, w = np.polynomial.legendre.leggauss(order)
    u1 = 0.5 * (x + 1.0)
    w1 = 0.5 * w
    grids = np.meshgrid(*([u1] * (d - 1)), indexing="ij")
    weights = np.prod(np.meshgrid(*([w1] * (d - 1)), indexing="ij"), axis=0).ravel()
    u = np.stack([g.ravel() for g in grids], axis=1)
    angular = (1.0 + np.sum(u * u, axis=1)) ** (-0.5 * s)
    poly = (1.0 - z)[None, :] * np.prod(1.0 - z[None, :, None] * u[:, None, :], axis=2)
    inner = poly @ wz
    return float(2.0**d * d * np.sum(weights * angular * inner))


def _fan_primitive(p: np.ndarray, tau: np.ndarray, beta: float) -> np.ndarray:
    """``G(tau) = int_0^tau |p| (p^2 + t^2)^(beta/2 - 1) dt`` (odd in tau).

    With ``v = tau^2 / (p^2 + tau^2)`` this is ``|p|^beta B_v(1/2, b) / 2``,
    ``b = (1 - beta)/2``, an incomplete beta function; negative ``b`` is
    lifted by one step of the recurrence in ``b``. Near ``beta = 1`` the
    recurrence cancels badly and Gauss quadrature is used instead.
    """
    a = np.abs(p)
    sgn = np.sign(tau)
    t = np.abs(tau)
    out = np.zeros(np.broadcast(a, t).shape)
    ok = a > 0
    if not np.any(ok):
        return out
    a = np.broadcast_to(a, out.shape)[ok]
    t = np.broadcast_to(t, out.shape)[ok]
    if beta == 1.0:
        out[ok] = a * np.arcsinh(t / a)
        return sgn * out
    b = 0.5 * (1.0 - beta)
    if abs(b) < 0.05:
        out[ok] = _fan_primitive_gauss(a, t, beta)
        return sgn * out
    v = t * t / (a * a + t * t)
    if b > 0:
        inc = special.betainc(0.5, b, v) * special.beta(0.5, b)
    else:
        lifted = special.betainc(0.5, b + 1.0, v) * special.beta(0.5, b + 1.0)
        inc = ((0.5 + b) * lifted - np.sqrt(v) * (1.0 - v) ** b) / b
    out[ok] = 0.5 * a**beta * inc
    return sgn * out


def _fan_primitive_gauss(a: np.ndarray, t: np.ndarray, beta: float) -> np.ndarray:
    """Quadrature version of :func:`_fan_primitive` for ``a > 0``, ``t >= 0``."""
    # angular substitution on t <= a, logarithmic substitution beyond
    gx, gw = _GL_INNER
    near = np.minimum(t, a)
    psi_hi = np.arctan2(near, a)
    psi = 0.5 * psi_hi[:, None] * (gx + 1.0)
    val = a**beta * (0.5 * psi_hi) * (np.cos(psi) ** (-beta) @ gw)
    far = t > a
    if np.any(far):
        af, tf = a[far], t[far]
        lo, hi = np.log(af), np.log(tf)
        hx, hw = _GL_OUTER
        u = 0.5 * (hi - lo)[:, None] * (hx + 1.0) + lo[:, None]
        tt = np.exp(u)
        f = af[:, None] * tt ** (beta - 1.0) * (1.0 + (af[:, None] / tt) ** 2) ** (0.5 * beta - 1.0)
        val[far] += 0.5 * (hi - lo) * (f @ hw)
    return val


def _padded(verts):
    """``(P, V, 2)`` vertex arrays; a single polygon broadcasts over points."""
    verts = np.asarray(verts, dtype=float)
    return verts[None] if verts.ndim == 2 else verts


def _edges(x, polys):
    """Per edge: signed distance ``p``, tangential offsets and a live mask.

    Padding repeats a vertex, which yields zero-length edges that are masked.
    """
    a = polys
    b = np.roll(polys, -1, axis=1)
    e = b - a
    length = np.hypot(e[..., 0], e[..., 1])
    live = length > 0
    safe = np.where(live, length, 1.0)
    t = e / safe[..., None]
    normal = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    ra = a - x[:, None, :]
    rb = b - x[:, None, :]
    p = np.sum(ra * normal, axis=-1)
    ta = np.sum(ra * t, axis=-1)
    tb = np.sum(rb * t, axis=-1)
    return p, ta, tb, live


def _fan_mask(p, ta, tb, live):
    # an edge line through x contributes nothing; a tiny |p| would only overflow
    return np.broadcast_to(live, p.shape) & (np.abs(p) > 1e-150 * (1.0 + np.abs(ta) + np.abs(tb)))


def polygon_potential(x: np.ndarray, verts: np.ndarray, s: float) -> np.ndarray:
    """Integral of ``|x - y|^-s`` over a polygon for each row of ``x``.

    ``verts`` is one CCW polygon ``(V, 2)`` or one per point ``(P, V, 2)``
    (pad short polygons by repeating a vertex); ``x`` may lie anywhere in the
    plane. Needs ``s < 2``.
    """
    beta = 2.0 - s
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p, ta, tb, live = _edges(x, _padded(verts))
    p, ta, tb = np.broadcast_arrays(p, ta, tb)
    live = _fan_mask(p, ta, tb, live)
    out = np.zeros(p.shape)
    pl = p[live]
    out[live] = np.sign(pl) * (_fan_primitive(pl, tb[live], beta) - _fan_primitive(pl, ta[live], beta))
    return out.sum(axis=1) / beta


_GL_FAN = np.polynomial.legendre.leggauss(24)


def polygon_extension_potential(x: np.ndarray, verts: np.ndarray, t: float) -> np.ndarray:
    """Integral of ``(|x - y|^2 + t^2)^(-1/2)`` over a CCW polygon, ``t > 0``.

    Same signed fan as :func:`polygon_potential`. The radial integral is
    ``sqrt(R^2 + t^2) - t``; its ``t = 0`` part ``R`` is integrated exactly
    and the bounded remainder by Gauss-Legendre in ``w = asinh(u / |p|)``
    along each edge (``u`` tangential offset), which stays smooth when ``x``
    nears an edge line or a corner.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    polys = _padded(verts)
    total = polygon_potential(x, polys, 1.0)
    p, ta, tb, live = _edges(x, polys)
    p, ta, tb = np.broadcast_arrays(p, ta, tb)
    live = _fan_mask(p, ta, tb, live)
    ap = np.abs(p[live])
    lo = np.arcsinh(ta[live] / ap)
    hi = np.arcsinh(tb[live] / ap)
    gx, gw = _GL_FAN
    w = 0.5 * (hi - lo)[:, None] * (gx + 1.0) + lo[:, None]
    ch = np.cosh(w)
    R = ap[:, None] * ch
    # d(angle) = dw / cosh(w)
    f = (t * t / (np.sqrt(R * R + t * t) + R) - t) / ch
    extra = np.zeros(p.shape)
    extra[live] = np.sign(p[live]) * 0.5 * (hi - lo) * (f @ gw)
    return total + extra.sum(axis=1)


@lru_cache(maxsize=16)
def _collapsed_triangle_rule(g: int):
    x, w = np.polynomial.legendre.leggauss(g)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    bary = np.stack([u.ravel(), (v * (1.0 - u)).ravel()], axis=1)
    return bary, (wu * wv * (1.0 - u)).ravel()


def triangle_rule(tri: np.ndarray, g: int = 3, levels: int = 0):
    """Gauss points and weights on a triangle (rows of ``tri``), any ambient dim."""
    tris = [np.asarray(tri, dtype=float)]
    for _ in range(levels):
        nxt = []
        for p, q, r in tris:
            pq, qr, rp = 0.5 * (p + q), 0.5 * (q + r), 0.5 * (r + p)
            nxt += [np.array(t) for t in ((p, pq, rp), (pq, q, qr), (rp, qr, r), (pq, qr, rp))]
        tris = nxt
    bary, bw = _collapsed_triangle_rule(g)
    pts, wts = [], []
    for p, q, r in tris:
        e1, e2 = q - p, r - p
        if len(p) == 2:
            jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
        else:
            jac = np.linalg.norm(np.cross(e1, e2))
        pts.append(p + bary[:, :1] * e1 + bary[:, 1:] * e2)
        wts.append(bw * jac)
    return np.vstack(pts), np.concatenate(wts)


def polygon_rule(verts: np.ndarray, g: int = 3, levels: int = 0):
    """Fan quadrature on a convex polygon (centroid apex)."""
    verts = np.asarray(verts, dtype=float)
    c = verts.mean(axis=0)
    pts, wts = [], []
    for a, b in zip(verts, np.roll(verts, -1, axis=0)):
        p, w = triangle_rule(np.array([c, a, b]), g, levels)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def polygon_self_energy(verts: np.ndarray, s: float, g: int = 6, levels: int = 1) -> float:
    """Double integral of ``|x - y|^-s`` over a planar convex polygon."""
    pts, w = polygon_rule(verts, g, levels)
    return float(w @ polygon_potential(pts, verts, s))


def planar_coordinates(poly3: np.ndarray) -> np.ndarray:
    """Isometric 2D coordinates of a planar polygon given in R^3, CCW."""
    poly3 = np.asarray(poly3, dtype=float)
    a = poly3[0]
    e1 = poly3[1] - a
    e1 /= np.linalg.norm(e1)
    n = np.cross(poly3[1] - a, poly3[2] - a)
    n /= np.linalg.norm(n)
    e2 = np.cross(n, e1)
    rel = poly3 - a
    return np.stack([rel @ e1, rel @ e2], axis=1)


def polygon_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
