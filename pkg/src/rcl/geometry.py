"""Convex bodies described by their support functions.

Bodies are immutable. A Minkowski combination is kept symbolically as a
:class:`Blend`, so interpolation is exact and free; only point sampling
ever builds an explicit boundary (by merging edge sequences in the plane, or
a hull of support points in space).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import shapely
from scipy.spatial import ConvexHull

from .errors import DegenerateBodyError, InvalidArgument, UnsupportedDimension
from .quadrature import polygon_rule, triangle_rule

UNIT_TOL = 1e-12


def _as_array(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


class ConvexBody:
    """Base class; subclasses implement ``support`` and ``support_point``."""

    dim: int
    kind: str

    def support(self, dirs: np.ndarray) -> np.ndarray:
        """Support function at the rows of ``dirs`` (no norm check)."""
        raise NotImplementedError

    def support_point(self, dirs: np.ndarray) -> np.ndarray:
        """A maximiser of ``<x, nu>`` over the body for each direction."""
        raise NotImplementedError

    @property
    def degenerate(self) -> bool:
        return self.affine_rank() < self.dim

    def affine_rank(self) -> int:
        raise NotImplementedError

    def reference_point(self) -> np.ndarray:
        raise NotImplementedError

    def translate(self, t) -> "ConvexBody":
        raise NotImplementedError

    def scale(self, r: float) -> "ConvexBody":
        """Dilation about the origin."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"


@dataclass(frozen=True, repr=False, eq=False)
class Ball(ConvexBody):
    center: np.ndarray
    radius: float
    kind: str = field(default="ball", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _as_array(self.center))
        if self.center.ndim != 1 or len(self.center) < 2:
            raise InvalidArgument("ball center must be a point in R^N, N >= 2")
        if not self.radius >= 0:
            raise InvalidArgument("ball radius must be nonnegative")

    @property
    def dim(self):
        return len(self.center)

    def support(self, dirs):
        return np.atleast_2d(dirs) @ self.center + self.radius

    def support_point(self, dirs):
        dirs = np.atleast_2d(dirs)
        return self.center + self.radius * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)

    def affine_rank(self):
        return self.dim if self.radius > 0 else 0

    def reference_point(self):
        return np.array(self.center)

    def translate(self, t):
        return Ball(self.center + np.asarray(t, float), self.radius)

    def scale(self, r):
        return Ball(r * self.center, r * self.radius)

    def to_dict(self):
        return {"dim": self.dim, "kind": "ball", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, repr=False, eq=False)
class Ellipsoid(ConvexBody):
    """Axis-aligned ellipsoid ``{c + diag(a) u : |u| <= 1}``."""

    center: np.ndarray
    semi_axes: np.ndarray
    kind: str = field(default="ellipsoid", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _as_array(self.center))
        object.__setattr__(self, "semi_axes", _as_array(self.semi_axes))
        if self.center.shape != self.semi_axes.shape or len(self.center) < 2:
            raise InvalidArgument("ellipsoid center and semi_axes must both have length N >= 2")
        if np.any(self.semi_axes < 0):
            raise InvalidArgument("semi_axes must be nonnegative")

    @property
    def dim(self):
        return len(self.center)

    def support(self, dirs):
        dirs = np.atleast_2d(dirs)
        return dirs @ self.center + np.linalg.norm(dirs * self.semi_axes, axis=1)

    def support_point(self, dirs):
        dirs = np.atleast_2d(dirs)
        a2 = dirs * self.semi_axes**2
        nrm = np.linalg.norm(dirs * self.semi_axes, axis=1, keepdims=True)
        return self.center + np.divide(a2, nrm, out=np.zeros_like(a2), where=nrm > 0)

    def affine_rank(self):
        return int(np.count_nonzero(self.semi_axes > 0))

    def reference_point(self):
        return np.array(self.center)

    def translate(self, t):
        return Ellipsoid(self.center + np.asarray(t, float), self.semi_axes)

    def scale(self, r):
        return Ellipsoid(r * self.center, abs(r) * self.semi_axes)

    def to_dict(self):
        return {"dim": self.dim, "kind": "ellipsoid", "center": self.center.tolist(),
                "semi_axes": self.semi_axes.tolist()}


@dataclass(frozen=True, repr=False, eq=False)
class Polytope(ConvexBody):
    """Convex hull of a finite vertex list (interior points are allowed)."""

    vertices: np.ndarray
    kind: str = field(default="polytope", init=False)

    def __post_init__(self):
        v = _as_array(self.vertices)
        if v.ndim != 2 or len(v) == 0 or v.shape[1] < 2:
            raise InvalidArgument("polytope needs a nonempty list of points in R^N, N >= 2")
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self):
        return self.vertices.shape[1]

    def support(self, dirs):
        return np.max(np.atleast_2d(dirs) @ self.vertices.T, axis=1)

    def support_point(self, dirs):
        return self.vertices[np.argmax(np.atleast_2d(dirs) @ self.vertices.T, axis=1)]

    def affine_rank(self):
        if len(self.vertices) == 1:
            return 0
        d = self.vertices[1:] - self.vertices[0]
        return int(np.linalg.matrix_rank(d, tol=1e-12 * max(1.0, np.abs(d).max())))

    def reference_point(self):
        return self.vertices.mean(axis=0)

    def translate(self, t):
        return Polytope(self.vertices + np.asarray(t, float))

    def scale(self, r):
        return Polytope(r * self.vertices)

    def to_dict(self):
        return {"dim": self.dim, "kind": "polytope", "vertices": self.vertices.tolist()}


@dataclass(frozen=True, repr=False, eq=False)
class Blend(ConvexBody):
    """Minkowski combination ``sum_k w_k K_k`` with nonnegative weights."""

    components: tuple
    kind: str = field(default="blend", init=False)

    def __post_init__(self):
        comps = tuple((float(w), b) for w, b in self.components)
        if not comps:
            raise InvalidArgument("blend needs at least one component")
        if any(w < 0 for w, _ in comps) or not any(w > 0 for w, _ in comps):
            raise InvalidArgument("blend weights must be nonnegative with at least one positive")
        dims = {b.dim for _, b in comps}
        if len(dims) != 1:
            raise InvalidArgument(f"blend components have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self):
        return self.components[0][1].dim

    def active(self):
        return [(w, b) for w, b in self.components if w > 0]

    def support(self, dirs):
        return sum(w * b.support(dirs) for w, b in self.active())

    def support_point(self, dirs):
        return sum(w * b.support_point(dirs) for w, b in self.active())

    def affine_rank(self):
        # the direction space of a Minkowski sum is the sum of direction spaces
        spans = []
        for _, b in self.active():
            pts = _affine_probe(b)
            if len(pts) > 1:
                spans.append(pts[1:] - pts[0])
        if not spans:
            return 0
        d = np.vstack(spans)
        return int(np.linalg.matrix_rank(d, tol=1e-9 * max(1.0, np.abs(d).max())))

    def reference_point(self):
        return sum(w * b.reference_point() for w, b in self.active())

    def translate(self, t):
        (w0, b0), rest = self.active()[0], self.active()[1:]
        return Blend(((w0, b0.translate(np.asarray(t, float) / w0)),) + tuple(rest))

    def scale(self, r):
        return Blend(tuple((w, b.scale(r)) for w, b in self.components))

    def to_dict(self):
        return {"dim": self.dim, "kind": "blend",
                "components": [{"weight": w, "body": b.to_dict()} for w, b in self.components]}


def _affine_probe(body: ConvexBody) -> np.ndarray:
    """Points whose affine span equals the body's affine hull."""
    if isinstance(body, Polytope):
        return body.vertices
    n = body.dim
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    return body.support_point(dirs)


# -- constructors ---------------------------------------------------------------


def ball(center: Sequence[float], radius: float) -> Ball:
    return Ball(center, radius)


def disk(radius: float = 1.0, center=(0.0, 0.0)) -> Ball:
    return Ball(center, radius)


def ellipsoid(center, semi_axes) -> Ellipsoid:
    return Ellipsoid(center, semi_axes)


def polytope(vertices) -> Polytope:
    return Polytope(vertices)


def box(lower, upper) -> Polytope:
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(len(lower), -1).T
    return Polytope(corners)


def unit_square() -> Polytope:
    """Side-1 square centred at the origin."""
    return box([-0.5, -0.5], [0.5, 0.5])


def regular_polygon(k: int, circumradius: float = 1.0, phase: float = math.pi / 2) -> Polytope:
    th = phase + 2 * np.pi * np.arange(k) / k
    return Polytope(circumradius * np.stack([np.cos(th), np.sin(th)], axis=1))


def equilateral_triangle(side: float = 1.0) -> Polytope:
    """Side-``side`` triangle centred at its centroid."""
    return regular_polygon(3, side / math.sqrt(3.0))


def blend(components) -> Blend:
    return Blend(tuple(components))


# -- body specification format ---------------------------------------------------


def body_from_dict(spec: dict, path: str = "body") -> ConvexBody:
    """Parse the JSON body format; errors name the offending field."""
    if not isinstance(spec, dict):
        raise InvalidArgument(f"{path}: expected an object")
    for key in ("dim", "kind"):
        if key not in spec:
            raise InvalidArgument(f"{path}.{key}: missing")
    dim, kind = spec["dim"], spec["kind"]
    if not isinstance(dim, int) or dim < 2:
        raise InvalidArgument(f"{path}.dim: must be an integer >= 2")

    def vec(key, length=dim):
        if key not in spec:
            raise InvalidArgument(f"{path}.{key}: missing")
        v = spec[key]
        if not (isinstance(v, list) and len(v) == length and all(isinstance(c, (int, float)) for c in v)):
            raise InvalidArgument(f"{path}.{key}: expected {length} numbers")
        return v

    try:
        if kind == "ball":
            r = spec.get("radius")
            if not isinstance(r, (int, float)):
                raise InvalidArgument(f"{path}.radius: expected a number")
            return Ball(vec("center"), float(r))
        if kind == "ellipsoid":
            return Ellipsoid(vec("center"), vec("semi_axes"))
        if kind == "polytope":
            verts = spec.get("vertices")
            if not isinstance(verts, list) or not verts:
                raise InvalidArgument(f"{path}.vertices: expected a nonempty list of points")
            for i, v in enumerate(verts):
                if not (isinstance(v, list) and len(v) == dim):
                    raise InvalidArgument(f"{path}.vertices[{i}]: expected {dim} numbers")
            return Polytope(verts)
        if kind == "blend":
            comps = spec.get("components")
            if not isinstance(comps, list) or not comps:
                raise InvalidArgument(f"{path}.components: expected a nonempty list")
            parsed = []
            for i, c in enumerate(comps):
                if not isinstance(c, dict) or "weight" not in c or "body" not in c:
                    raise InvalidArgument(f"{path}.components[{i}]: needs 'weight' and 'body'")
                if not isinstance(c["weight"], (int, float)) or isinstance(c["weight"], bool):
                    raise InvalidArgument(f"{path}.components[{i}].weight: expected a number")
                child = body_from_dict(c["body"], f"{path}.components[{i}].body")
                if child.dim != dim:
                    raise InvalidArgument(f"{path}.components[{i}].body.dim: expected {dim}")
                parsed.append((c["weight"], child))
            return Blend(tuple(parsed))
    except InvalidArgument as exc:
        if str(exc).startswith(path):
            raise
        raise InvalidArgument(f"{path}: {exc}") from exc
    raise InvalidArgument(f"{path}.kind: unknown kind {kind!r}")


def load_body(path) -> ConvexBody:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"{path}: not valid JSON ({exc})") from exc
    try:
        return body_from_dict(spec)
    except InvalidArgument as exc:
        raise InvalidArgument(f"{path}: {exc}") from exc


# -- support-function operations -------------------------------------------------


def _check_unit(nu: np.ndarray):
    norms = np.linalg.norm(np.atleast_2d(nu), axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise InvalidArgument("direction must have unit norm (within 1e-12)")


def support_function(body: ConvexBody, nu) -> float | np.ndarray:
    """``h_K(nu) = sup_{x in K} <x, nu>``; ``nu`` one direction or a stack of them."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape[-1] != body.dim:
        raise InvalidArgument(f"direction has dimension {nu.shape[-1]}, body has {body.dim}")
    _check_unit(nu)
    val = body.support(nu)
    return float(val[0]) if nu.ndim == 1 else val


def minkowski_interpolate(k0: ConvexBody, k1: ConvexBody, lam: float) -> Blend:
    """The body ``lam K1 + (1 - lam) K0``."""
    if k0.dim != k1.dim:
        raise InvalidArgument(f"dimension mismatch: {k0.dim} vs {k1.dim}")
    if not 0.0 <= lam <= 1.0:
        raise InvalidArgument(f"lambda={lam} outside [0, 1]")
    return Blend(((1.0 - lam, k0), (lam, k1)))


def dilate(body: ConvexBody, eps: float) -> ConvexBody:
    """``K + B(eps)``."""
    if eps < 0:
        raise InvalidArgument("dilation radius must be nonnegative")
    if eps == 0:
        return body
    return Blend(((1.0, body), (eps, Ball(np.zeros(body.dim), 1.0))))


def circle_directions(m: int) -> np.ndarray:
    th = 2 * np.pi * np.arange(m) / m
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def fibonacci_sphere(m: int) -> np.ndarray:
    i = np.arange(m) + 0.5
    z = 1.0 - 2.0 * i / m
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    th = np.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def sphere_quadrature(dim: int, order: int):
    """Nodes and weights on the unit sphere; weights sum to its surface area."""
    if dim == 2:
        return circle_directions(order), np.full(order, 2 * np.pi / order)
    if dim == 3:
        z, wz = np.polynomial.legendre.leggauss(order)
        m = 2 * order
        th = 2 * np.pi * np.arange(m) / m
        zz, tt = np.meshgrid(z, th, indexing="ij")
        r = np.sqrt(1.0 - zz**2)
        nodes = np.stack([r * np.cos(tt), r * np.sin(tt), zz], axis=-1).reshape(-1, 3)
        w = np.repeat(wz * (2 * np.pi / m), m)
        return nodes, w
    raise UnsupportedDimension(f"sphere quadrature implemented for N in {{2, 3}}, got {dim}")


def mean_width(body: ConvexBody, quadrature_order: int = 256) -> float:
    """``(2 / |S^{N-1}|) * int_{S^{N-1}} h_K``."""
    if quadrature_order < 8:
        raise InvalidArgument("quadrature_order must be >= 8")
    if isinstance(body, Blend):
        # Minkowski-linear; keeps polygon components on the exact path below
        return sum(w * mean_width(b, quadrature_order) for w, b in body.active())
    if isinstance(body, Polytope) and body.dim == 2:
        return _polygon_mean_width(body.vertices)
    nodes, w = sphere_quadrature(body.dim, quadrature_order)
    return float(2.0 * (w @ body.support(nodes)) / w.sum())


def _polygon_mean_width(vertices: np.ndarray) -> float:
    """Exact ``(1/pi) int_0^{2pi} h``: each vertex is integrated over its normal cone."""
    if len(vertices) == 1:
        return 0.0
    if np.linalg.matrix_rank(vertices - vertices[0], tol=1e-12) < 2:
        d = vertices @ (vertices[-1] - vertices[0])
        vs = vertices[[np.argmax(d), np.argmin(d)]]
    else:
        vs = vertices[ConvexHull(vertices).vertices]
    # outward normal angle of edge k (from vs[k] to vs[k+1]), CCW order
    e = np.roll(vs, -1, axis=0) - vs
    ang = np.arctan2(-e[:, 0], e[:, 1])
    total = 0.0
    for k, v in enumerate(vs):
        a, b = ang[k - 1], ang[k]
        if b < a:
            b += 2 * np.pi
        total += v[0] * (math.sin(b) - math.sin(a)) - v[1] * (math.cos(b) - math.cos(a))
    return float(total / np.pi)


def perimeter_2d(body: ConvexBody) -> float:
    if body.dim != 2:
        raise UnsupportedDimension("perimeter_2d needs N = 2")
    if isinstance(body, Ball):
        return 2 * math.pi * body.radius
    if isinstance(body, Polytope):
        if body.affine_rank() < 2:
            ext = body.vertices @ (body.vertices[-1] - body.vertices[0])
            i, j = np.argmin(ext), np.argmax(ext)
            return 2.0 * float(np.linalg.norm(body.vertices[j] - body.vertices[i]))
        hull = body.vertices[ConvexHull(body.vertices).vertices]
        return float(np.sum(np.linalg.norm(hull - np.roll(hull, -1, axis=0), axis=1)))
    if isinstance(body, Ellipsoid):
        from scipy.integrate import quad

        a, b = body.semi_axes
        val, _ = quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0.0, 2 * math.pi,
                      limit=200, epsabs=1e-13, epsrel=1e-13)
        return val
    # perimeter is Minkowski-linear in the plane
    return sum(w * perimeter_2d(b) for w, b in body.active())


def hausdorff_distance(k: ConvexBody, l: ConvexBody, directions: int = 1024) -> float:
    """Sup-distance of support functions over sampled unit directions."""
    if k.dim != l.dim:
        raise InvalidArgument(f"dimension mismatch: {k.dim} vs {l.dim}")
    if directions < 32:
        raise InvalidArgument("need at least 32 directions")
    if k.dim == 2:
        dirs = circle_directions(directions)
    elif k.dim == 3:
        dirs = fibonacci_sphere(directions)
    else:
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((directions, k.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return float(np.max(np.abs(k.support(dirs) - l.support(dirs))))


# -- explicit boundaries ---------------------------------------------------------


def smooth_vertex_count(resolution: int) -> int:
    return max(256, int(resolution))


def boundary_polygon(body: ConvexBody, smooth_vertices: int = 256) -> np.ndarray:
    """Counter-clockwise vertices of a convex polygon approximating a planar body.

    Polytope components are exact; smooth components are replaced by the
    polygon through their support points at equally spaced normal angles.
    """
    if body.dim != 2:
        raise UnsupportedDimension("boundary_polygon needs N = 2")
    if isinstance(body, Polytope):
        if body.affine_rank() < 2:
            raise DegenerateBodyError("polygon has empty interior")
        return body.vertices[ConvexHull(body.vertices).vertices]
    if isinstance(body, (Ball, Ellipsoid)):
        pts = body.support_point(circle_directions(smooth_vertices))
        return _dedupe(pts)
    parts = [w * boundary_polygon(b, smooth_vertices) for w, b in body.active()]
    return minkowski_sum_polygons(parts)


def _dedupe(pts: np.ndarray) -> np.ndarray:
    keep = np.linalg.norm(pts - np.roll(pts, 1, axis=0), axis=1) > 1e-14 * (1 + np.abs(pts).max())
    return pts[keep]


def minkowski_sum_polygons(polys: list) -> np.ndarray:
    """Minkowski sum of convex CCW polygons by merging their edge sequences."""
    start = np.zeros(2)
    edges = []
    for p in polys:
        p = np.asarray(p, float)
        if len(p) == 1:
            start = start + p[0]
            continue
        i0 = np.lexsort((p[:, 0], p[:, 1]))[0]
        p = np.roll(p, -i0, axis=0)
        start = start + p[0]
        edges.append(np.roll(p, -1, axis=0) - p)
    if not edges:
        return start[None, :]
    e = np.vstack(edges)
    e = e[np.linalg.norm(e, axis=1) > 0]
    ang = np.mod(np.arctan2(e[:, 1], e[:, 0]), 2 * np.pi)
    # rounding can push the last edge of a polygon to ~2pi
    ang[ang > 2 * np.pi - 1e-12] = 0.0
    e = e[np.argsort(ang, kind="stable")]
    # merge parallel consecutive edges
    merged = [e[0]]
    for v in e[1:]:
        u = merged[-1]
        if abs(u[0] * v[1] - u[1] * v[0]) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v) and u @ v > 0:
            merged[-1] = u + v
        else:
            merged.append(v)
    verts = start + np.cumsum(np.vstack([np.zeros(2), merged[:-1]]), axis=0)
    # the start vertex is fragile under near-ties in y; pin the translation by
    # the extreme vertex in a direction no edge normal is likely to hit
    u = np.array([math.cos(4.1), math.sin(4.1)])
    target = sum(np.asarray(p, float)[np.argmax(np.asarray(p, float) @ u)] for p in polys)
    return verts + (target - verts[np.argmax(verts @ u)])


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangulated convex surface in R^3 with outward facet normals."""

    triangles: np.ndarray  # (m, 3, 3)
    equations: np.ndarray  # hull facet equations, a.x + b <= 0 inside
    volume: float


def surface_mesh(body: ConvexBody, target: int = 2000) -> SurfaceMesh:
    """Polyhedral approximation of a body in R^3 (hull of support points)."""
    if body.dim != 3:
        raise UnsupportedDimension("surface_mesh needs N = 3")
    if body.degenerate:
        raise DegenerateBodyError("body has empty interior")
    if isinstance(body, Polytope):
        pts = body.vertices
    else:
        pts = body.support_point(fibonacci_sphere(max(64, target // 2 + 2)))
        verts = _polytope_vertices(body)
        if verts is not None:
            pts = np.vstack([pts, verts])
    hull = ConvexHull(pts)
    tris = hull.points[hull.simplices]
    # orient counter-clockwise seen from outside
    nrm = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    flip = np.einsum("ij,ij->i", nrm, hull.equations[:, :3]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return SurfaceMesh(tris, hull.equations, float(hull.volume))


def _polytope_vertices(body: ConvexBody):
    """All vertex sums when every component is a (small) polytope."""
    if not isinstance(body, Blend):
        return None
    acc = np.zeros((1, body.dim))
    for w, b in body.active():
        if not isinstance(b, Polytope):
            return None
        acc = (acc[:, None, :] + w * b.vertices[None, :, :]).reshape(-1, body.dim)
        if len(acc) > 200_000:
            return None
    return acc


def contains(body: ConvexBody, pts, smooth_vertices: int = 256, tol: float = 1e-12) -> np.ndarray:
    """Boolean membership of the rows of ``pts`` (planar bodies via their polygon)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    if isinstance(body, Ball):
        return np.linalg.norm(pts - body.center, axis=1) <= body.radius * (1 + tol)
    if isinstance(body, Ellipsoid) and np.all(body.semi_axes > 0):
        return np.linalg.norm((pts - body.center) / body.semi_axes, axis=1) <= 1 + tol
    if body.dim == 2:
        poly = boundary_polygon(body, smooth_vertices)
        a = poly
        b = np.roll(poly, -1, axis=0)
        cross = ((b - a)[None, :, 0] * (pts[:, None, 1] - a[None, :, 1])
                 - (b - a)[None, :, 1] * (pts[:, None, 0] - a[None, :, 0]))
        scale = np.linalg.norm(b - a, axis=1)[None, :] * (1 + np.abs(poly).max())
        return np.all(cross >= -tol * scale, axis=1)
    if body.dim == 3:
        eq = surface_mesh(body).equations
        return np.all(pts @ eq[:, :3].T + eq[:, 3] <= tol * (1 + np.abs(pts).max()), axis=1)
    raise UnsupportedDimension(f"membership implemented for N in {{2, 3}}, got {body.dim}")


def diameter(body: ConvexBody) -> float:
    if isinstance(body, Ball):
        return 2.0 * body.radius
    if body.dim == 2:
        pts = boundary_polygon(body) if not body.degenerate else _affine_probe(body)
    elif body.dim == 3:
        pts = surface_mesh(body).triangles.reshape(-1, 3)
    else:
        raise UnsupportedDimension("diameter implemented for N in {2, 3}")
    from scipy.spatial.distance import pdist

    return float(pdist(pts).max()) if len(pts) > 1 else 0.0


def bounding_box(body: ConvexBody):
    e = np.eye(body.dim)
    return -body.support(-e), body.support(e)


# -- point clouds ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Quadrature carrier for a body: one point per cell.

    ``weights`` are cell measures (length^N in interior mode, length^(N-1) in
    boundary mode). Each cell also carries a small quadrature rule
    (``quad_points``, ``quad_weights``; rows padded with zero weight) used for
    near-field interactions. ``polygons`` keeps exact planar cells when
    available; ``full`` marks whole lattice squares/cubes, whose side is
    ``sizes[i]`` (boundary cells of planar lattices are split, so sizes vary).
    """

    points: np.ndarray
    weights: np.ndarray
    mode: str = "interior"
    spacing: float = 0.0
    cell_dim: int = 0
    quad_points: np.ndarray | None = None
    quad_weights: np.ndarray | None = None
    polygons: tuple | None = None
    full: np.ndarray | None = None
    sizes: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, float))
        w = np.asarray(self.weights, float).ravel()
        if len(pts) != len(w):
            raise InvalidArgument("points and weights have different lengths")
        if len(pts) == 0:
            raise InvalidArgument("empty point cloud")
        if np.any(w <= 0):
            raise InvalidArgument("cloud weights must be positive")
        if self.mode not in ("interior", "boundary"):
            raise InvalidArgument("mode must be 'interior' or 'boundary'")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self.cell_dim == 0:
            d = pts.shape[1] if self.mode == "interior" else pts.shape[1] - 1
            object.__setattr__(self, "cell_dim", d)
        if self.sizes is None:
            object.__setattr__(self, "sizes", np.full(len(pts), float(self.spacing)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    @property
    def has_cells(self) -> bool:
        return self.quad_points is not None

    @cached_property
    def polygon_array(self) -> np.ndarray | None:
        """Planar cells as one ``(n, V, 2)`` array, short ones padded."""
        if self.polygons is None or self.cell_dim != 2 or self.dim != 2:
            return None
        v = max(len(p) for p in self.polygons)
        out = np.empty((len(self.polygons), v, 2))
        for k, poly in enumerate(self.polygons):
            out[k, : len(poly)] = poly
            out[k, len(poly):] = poly[-1]
        return out

    def transformed(self, r: float, t=None) -> "PointCloud":
        """The cloud of ``r * K + t``."""
        t = np.zeros(self.dim) if t is None else np.asarray(t, float)
        d = self.cell_dim
        return PointCloud(
            r * self.points + t, r**d * self.weights, self.mode, r * self.spacing, d,
            None if self.quad_points is None else r * self.quad_points + t,
            None if self.quad_weights is None else r**d * self.quad_weights,
            None if self.polygons is None else tuple(r * p + t for p in self.polygons),
            self.full,
            r * self.sizes,
        )


def sample_points(body: ConvexBody, mode: str = "interior", resolution: int = 500) -> PointCloud:
    """Discretise a body by about ``resolution`` cells.

    Interior mode clips a lattice anchored at the body's reference point
    against the body (exact cut cells in the plane, sub-cube classification in
    space). Boundary mode partitions the boundary into segments (plane) or
    triangles (space).
    """
    if resolution < 4:
        raise InvalidArgument("resolution must be >= 4")
    if mode not in ("interior", "boundary"):
        raise InvalidArgument("mode must be 'interior' or 'boundary'")
    if body.dim not in (2, 3):
        raise UnsupportedDimension(f"sampling implemented for N in {{2, 3}}, got {body.dim}")
    if body.degenerate:
        raise DegenerateBodyError(f"{body.kind} body has empty interior; cannot sample its {mode}")
    if body.dim == 2:
        poly = boundary_polygon(body, smooth_vertex_count(resolution))
        if mode == "interior":
            return _lattice_cells_2d(poly, resolution, body.reference_point())
        return _boundary_segments(poly, resolution)
    mesh = surface_mesh(body, resolution)
    if mode == "interior":
        return _lattice_cells_3d(body, mesh, resolution)
    return _boundary_panels(mesh, resolution)


BOUNDARY_REFINE = 2


def _lattice_cells_2d(poly: np.ndarray, n: int, anchor: np.ndarray, refine: int = BOUNDARY_REFINE) -> PointCloud:
    P = shapely.Polygon(poly)
    # pick the lattice step so that the cell count after boundary refinement is about n
    h = math.sqrt(P.area / n)
    if refine > 1:
        perim = P.length
        # interior cells ~ A/h^2, boundary layer adds (r^2 - 1) cells per ~perim/h lattice cells
        a, b, c = n, -(refine**2 - 1) * perim, -P.area
        h = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
    x0, y0, x1, y1 = P.bounds
    i0, i1 = math.floor((x0 - anchor[0]) / h) - 1, math.ceil((x1 - anchor[0]) / h) + 1
    j0, j1 = math.floor((y0 - anchor[1]) / h) - 1, math.ceil((y1 - anchor[1]) / h) + 1
    I, J = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
    lx = anchor[0] + (I.ravel() - 0.5) * h
    ly = anchor[1] + (J.ravel() - 0.5) * h
    area = shapely.area(shapely.intersection(shapely.box(lx, ly, lx + h, ly + h), P))
    inner = np.abs(area - h * h) <= 1e-9 * h * h
    cut = (area > 1e-9 * h * h) & ~inner
    sx, sy, ss = [lx[inner]], [ly[inner]], [np.full(inner.sum(), h)]
    if refine > 1:
        k = (np.arange(refine) * h / refine)
        ox, oy = np.meshgrid(k, k, indexing="ij")
        sx.append((lx[cut][:, None] + ox.ravel()).ravel())
        sy.append((ly[cut][:, None] + oy.ravel()).ravel())
        ss.append(np.full(cut.sum() * refine * refine, h / refine))
    else:
        sx.append(lx[cut]); sy.append(ly[cut]); ss.append(np.full(cut.sum(), h))
    lx, ly, size = np.concatenate(sx), np.concatenate(sy), np.concatenate(ss)
    cells = shapely.intersection(shapely.box(lx, ly, lx + size, ly + size), P)
    area = shapely.area(cells)
    keep = area > 1e-9 * size * size
    cells, area, lx, ly, size = cells[keep], area[keep], lx[keep], ly[keep], size[keep]
    full = np.abs(area - size * size) <= 1e-9 * size * size
    polys, centers = [], np.empty((len(cells), 2))
    for k, c in enumerate(cells):
        if full[k]:
            x, y, s = lx[k], ly[k], size[k]
            v = np.array([[x, y], [x + s, y], [x + s, y + s], [x, y + s]])
            centers[k] = (x + s / 2, y + s / 2)
        else:
            c = shapely.geometry.polygon.orient(_largest_polygon(c), 1.0)
            v = np.asarray(c.exterior.coords)[:-1]
            v = v[np.linalg.norm(v - np.roll(v, 1, axis=0), axis=1) > 1e-14 * size[k]]
            centers[k] = np.asarray(c.centroid.coords)[0]
        polys.append(v)
    qp, qw = _pad_rules([polygon_rule(v, 3) for v in polys])
    return PointCloud(centers, area, "interior", h, 2, qp, qw, tuple(polys), full, size)


def _largest_polygon(geom):
    if geom.geom_type == "Polygon":
        return geom
    parts = [g for g in getattr(geom, "geoms", []) if g.geom_type == "Polygon"]
    return max(parts, key=lambda g: g.area)


def _pad_rules(rules):
    q = max(len(w) for _, w in rules)
    d = rules[0][0].shape[1]
    qp = np.zeros((len(rules), q, d))
    qw = np.zeros((len(rules), q))
    for k, (p, w) in enumerate(rules):
        qp[k, : len(w)] = p
        qp[k, len(w):] = p[0]
        qw[k, : len(w)] = w
    return qp, qw


def _boundary_segments(poly: np.ndarray, n: int) -> PointCloud:
    a = poly
    b = np.roll(poly, -1, axis=0)
    lengths = np.linalg.norm(b - a, axis=1)
    step = lengths.sum() / n
    pts, wts, segs = [], [], []
    for p, q, L in zip(a, b, lengths):
        m = max(1, int(round(L / step)))
        t = np.linspace(0.0, 1.0, m + 1)
        ends = p + t[:, None] * (q - p)
        for u, v in zip(ends[:-1], ends[1:]):
            segs.append(np.array([u, v]))
            pts.append(0.5 * (u + v))
            wts.append(L / m)
    gx, gw = np.polynomial.legendre.leggauss(6)
    rules = [(u + 0.5 * (gx[:, None] + 1) * (v - u), 0.5 * gw * np.linalg.norm(v - u)) for u, v in segs]
    qp, qw = _pad_rules(rules)
    return PointCloud(np.array(pts), np.array(wts), "boundary", step, 1, qp, qw, tuple(segs), None)


def _boundary_panels(mesh: SurfaceMesh, n: int) -> PointCloud:
    tris = mesh.triangles
    area = 0.5 * np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    target = area.sum() / n
    panels = []
    for t, A in zip(tris, area):
        m = max(1, int(round(math.sqrt(A / target))))
        panels.extend(_subdivide_triangle(t, m))
    panels = np.array(panels)
    parea = 0.5 * np.linalg.norm(np.cross(panels[:, 1] - panels[:, 0], panels[:, 2] - panels[:, 0]), axis=1)
    keep = parea > 1e-12 * target
    panels, parea = panels[keep], parea[keep]
    qp, qw = _pad_rules([triangle_rule(p, 2, 1) for p in panels])
    return PointCloud(panels.mean(axis=1), parea, "boundary", math.sqrt(target), 2, qp, qw,
                      tuple(panels), None)


def _subdivide_triangle(t: np.ndarray, m: int):
    p, q, r = t
    e1, e2 = (q - p) / m, (r - p) / m
    out = []
    for i in range(m):
        for j in range(m - i):
            a = p + i * e1 + j * e2
            out.append(np.array([a, a + e1, a + e2]))
            if i + j < m - 1:
                out.append(np.array([a + e1, a + e1 + e2, a + e2]))
    return out


SUBCELLS_3D = 4


def _lattice_cells_3d(body: ConvexBody, mesh: SurfaceMesh, n: int) -> PointCloud:
    h = (mesh.volume / n) ** (1.0 / 3.0)
    anchor = body.reference_point()
    eq = mesh.equations
    lo = mesh.triangles.reshape(-1, 3).min(axis=0)
    hi = mesh.triangles.reshape(-1, 3).max(axis=0)
    ranges = [np.arange(math.floor((lo[k] - anchor[k]) / h) - 1, math.ceil((hi[k] - anchor[k]) / h) + 1)
              for k in range(3)]
    idx = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, 3)
    corner = anchor + (idx - 0.5) * h
    offs = np.stack(np.meshgrid([0, 1], [0, 1], [0, 1], indexing="ij"), axis=-1).reshape(-1, 3)

    def inside(p):
        return np.all(p @ eq[:, :3].T + eq[:, 3] <= 1e-12, axis=-1)

    corners_in = inside((corner[:, None, :] + h * offs[None]).reshape(-1, 3)).reshape(-1, 8)
    full = corners_in.all(axis=1)
    m = SUBCELLS_3D
    sub = (np.stack(np.meshgrid(*([np.arange(m)] * 3), indexing="ij"), axis=-1).reshape(-1, 3) + 0.5) / m
    g = 3
    full_rule = (np.stack(np.meshgrid(*([np.arange(g)] * 3), indexing="ij"), axis=-1).reshape(-1, 3) + 0.5) / g
    pts, wts, rules, is_full = [], [], [], []
    for c, f in zip(corner, full):
        if f:
            pts.append(c + 0.5 * h)
            wts.append(h**3)
            rules.append((c + h * full_rule, np.full(g**3, h**3 / g**3)))
            is_full.append(True)
            continue
        sp = c + h * sub
        kin = inside(sp)
        if not np.any(kin):
            continue
        sp = sp[kin]
        w = np.full(len(sp), (h / m) ** 3)
        pts.append(sp.mean(axis=0))
        wts.append(w.sum())
        rules.append((sp, w))
        is_full.append(False)
    qp, qw = _pad_rules(rules)
    return PointCloud(np.array(pts), np.array(wts), "interior", h, 3, qp, qw, None, np.array(is_full),
                      np.full(len(pts), h))
