"""Uniformly convex planar domains and their defining functions.

A defining function h vanishes on the boundary, is negative inside, has a
uniformly positive Hessian (modulus theta), and is normalized by the builder
so that inf h = -1. Three descriptor kinds are supported: analytic ellipses,
analytic superellipses, and smoothed polygons. Polygon input is first rounded
into a strictly convex analytic curve (soft-max of the edge half-planes plus
a small quadratic that keeps the boundary curvature bounded away from zero);
the blended two-piece construction is then applied to that curve, which makes
every near-infimum sublevel an exact ball.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as _gamma_fn

from .errors import ConfigError, ConstructionError, DomainExceededError, GeometryError
from .grid import _eval_trig

__all__ = [
    "DomainDescriptor",
    "DefiningFunction",
    "BoundaryCurve",
    "build_defining_function",
    "build_appendix_h",
    "blending_phi",
    "sublevel_family",
    "domain_metrics",
    "DomainMetrics",
    "distance_to_boundary",
    "eval_defining",
    "polygon_edge_distance",
]

_THETA_SAMPLES = 10_000
_THETA_SEED = 7
_CURVE_TABLE = 512


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "ellipse": {"kind", "a", "b", "rotation", "center", "anchor"},
    "superellipse": {"kind", "a", "b", "p", "rotation", "center", "anchor"},
    "smoothed_polygon": {"kind", "vertices", "epsilon", "anchor"},
}


def _polygon_ccw(vertices):
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("polygon needs at least three 2-D vertices")
    area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    if area2 < 0:
        v = v[::-1].copy()
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    if not (cross > 1e-12 * np.abs(area2)).all():
        raise GeometryError("polygon is not strictly convex")
    return v


@dataclass(frozen=True)
class DomainDescriptor:
    """Analytic description of a uniformly convex planar domain."""

    kind: str
    a: float = None
    b: float = None
    p: float = 2.0
    rotation: float = 0.0
    center: tuple = (0.0, 0.0)
    vertices: tuple = None
    epsilon: float = None
    anchor: tuple = None

    def __post_init__(self):
        if self.kind not in _CONFIG_KEYS:
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if self.kind in ("ellipse", "superellipse"):
            if self.a is None or self.b is None or self.a <= 0 or self.b <= 0:
                raise GeometryError("ellipse kinds need positive semiaxes a, b")
            if self.kind == "superellipse" and self.p < 2.0:
                raise GeometryError("superellipse exponent must satisfy p >= 2")
        else:
            v = _polygon_ccw(self.vertices)
            object.__setattr__(self, "vertices", tuple(map(tuple, v)))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.anchor is not None:
            object.__setattr__(self, "anchor", tuple(float(c) for c in self.anchor))

    def to_config(self):
        out = {"kind": self.kind}
        if self.kind in ("ellipse", "superellipse"):
            out["a"] = self.a
            out["b"] = self.b
            out["rotation"] = self.rotation
            out["center"] = list(self.center)
            if self.kind == "superellipse":
                out["p"] = self.p
        else:
            out["vertices"] = [list(v) for v in self.vertices]
            if self.epsilon is not None:
                out["epsilon"] = self.epsilon
        if self.anchor is not None:
            out["anchor"] = list(self.anchor)
        return out

    @classmethod
    def from_config(cls, block):
        if not isinstance(block, dict) or "kind" not in block:
            raise ConfigError("domain block must be a mapping with a 'kind' key")
        kind = block["kind"]
        allowed = _CONFIG_KEYS.get(kind)
        if allowed is None:
            raise ConfigError(f"unknown domain kind {kind!r}")
        unknown = set(block) - allowed
        if unknown:
            raise ConfigError(f"unknown domain keys for {kind}: {sorted(unknown)}")
        kwargs = {k: block[k] for k in block if k != "kind"}
        for key in ("center", "anchor"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "vertices" in kwargs:
            kwargs["vertices"] = tuple(map(tuple, kwargs["vertices"]))
        try:
            return cls(kind=kind, **kwargs)
        except (GeometryError, TypeError) as exc:
            raise ConfigError(f"bad domain block: {exc}") from exc


# ---------------------------------------------------------------------------
# Boundary curves
# ---------------------------------------------------------------------------

def vector_ray_roots(value_fn, anchor, phis, scale, iters=90):
    """Radii r(phi) with value_fn(anchor + r u(phi)) = 0, by vector bisection."""
    anchor = np.asarray(anchor, dtype=float)
    u = np.column_stack([np.cos(phis), np.sin(phis)])

    def f(r):
        return value_fn(anchor + r[:, None] * u)

    lo = np.zeros(len(phis))
    hi = np.full(len(phis), 0.6 * scale)
    for _ in range(80):
        bad = f(hi) <= 0.0
        if not bad.any():
            break
        hi[bad] *= 1.5
    else:
        raise GeometryError("could not bracket the boundary along some ray")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


class BoundaryCurve:
    """Closed strictly convex curve stored as a trigonometric radial graph."""

    def __init__(self, center, radius_table):
        self.center = np.asarray(center, dtype=float)
        self.table = np.asarray(radius_table, dtype=float)
        self.n = len(self.table)
        self._rfft = np.fft.rfft(self.table)
        theta = 2.0 * np.pi * np.arange(4 * self.n) / (4 * self.n)
        self._scan_theta = theta
        self._scan_points = self.point(theta)

    def radius(self, theta, deriv=0):
        return _eval_trig(self._rfft, self.n, theta, deriv)

    def point(self, theta):
        r = self.radius(theta)
        return self.center + r[..., None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=-1)

    def velocity(self, theta):
        r = self.radius(theta)
        r1 = self.radius(theta, 1)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        up = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        return r1[..., None] * u + r[..., None] * up

    def acceleration(self, theta):
        r = self.radius(theta)
        r1 = self.radius(theta, 1)
        r2 = self.radius(theta, 2)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        up = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        return (r2 - r)[..., None] * u + (2.0 * r1)[..., None] * up

    def tangent_normal(self, theta):
        v = self.velocity(theta)
        speed = np.hypot(v[..., 0], v[..., 1])
        t = v / speed[..., None]
        nu = np.stack([t[..., 1], -t[..., 0]], axis=-1)   # outward for CCW radial graphs
        return t, nu

    def curvature(self, theta):
        v = self.velocity(theta)
        a = self.acceleration(theta)
        speed = np.hypot(v[..., 0], v[..., 1])
        return (v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]) / speed ** 3

    def contains(self, points):
        d = np.asarray(points, dtype=float) - self.center
        theta = np.arctan2(d[..., 1], d[..., 0])
        return np.hypot(d[..., 0], d[..., 1]) <= self.radius(theta)

    def foot_point(self, points, iters=40, tol=1e-13):
        """Closest boundary point per query; Newton on the closest-point angle."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((pts[:, None, :] - self._scan_points[None, :, :]) ** 2).sum(-1)
        theta = self._scan_theta[np.argmin(d2, axis=1)]
        scale = max(np.abs(self.table).max(), 1.0)
        step_cap = 2.0 * np.pi / self.n
        for _ in range(iters):
            y = self.point(theta)
            v = self.velocity(theta)
            a = self.acceleration(theta)
            r = pts - y
            d1 = -2.0 * (r * v).sum(-1)
            d2_ = 2.0 * (v * v).sum(-1) - 2.0 * (r * a).sum(-1)
            d2_ = np.where(d2_ > 1e-12 * scale ** 2, d2_, scale ** 2)
            step = np.clip(d1 / d2_, -step_cap, step_cap)
            theta = theta - step
            if np.abs(d1).max() <= tol * scale ** 2:
                break
        y = self.point(theta)
        dist = np.hypot(*(pts - y).T)
        return theta, y, dist

    def signed_inner_distance(self, points):
        """Distance to the curve, positive inside, negative outside; plus foot data."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        theta, y, dist = self.foot_point(pts)
        sign = np.where(self.contains(pts), 1.0, -1.0)
        return sign * dist, theta, y

    def diameter(self):
        pts = self._scan_points[:: max(1, len(self._scan_points) // 1024)]
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        return float(np.sqrt(d2.max()))

    def max_curvature(self):
        return float(self.curvature(self._scan_theta).max())


def _polygon_centroid(v):
    x, y = v[:, 0], v[:, 1]
    xr, yr = np.roll(x, -1), np.roll(y, -1)
    cross = x * yr - xr * y
    area = cross.sum() / 2.0
    cx = ((x + xr) * cross).sum() / (6.0 * area)
    cy = ((y + yr) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def polygon_edge_distance(vertices, points):
    """Exact distance from interior points to the polygon boundary.

    For points inside a convex polygon this is the minimum over the edge
    lines; implemented as exact segment projection so it is also correct for
    outside queries (used by validation tests).
    """
    v = _polygon_ccw(vertices)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(pts), np.inf)
    for k in range(len(v)):
        a, b = v[k], v[(k + 1) % len(v)]
        e = b - a
        tt = np.clip(((pts - a) @ e) / (e @ e), 0.0, 1.0)
        proj = a + tt[:, None] * e
        best = np.minimum(best, np.hypot(*(pts - proj).T))
    return best


def _smoothed_polygon_curve(vertices, round_frac=0.2, mu_frac=0.5, beta_factor=2.0):
    """Strictly convex analytic curve rounding a convex polygon.

    Zero level of softmax(edge half-planes) + small centered quadratic; the
    quadratic keeps the edge-midpoint curvature bounded away from zero, the
    softmax width rounds the corners at a fraction of the inradius.
    """
    v = _polygon_ccw(vertices)
    centroid = _polygon_centroid(v)
    e = np.roll(v, -1, axis=0) - v
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    normals /= np.hypot(normals[:, 0], normals[:, 1])[:, None]
    offsets = (normals * v).sum(axis=1)
    inradius = float((offsets - normals @ centroid).min())
    if inradius <= 0:
        raise GeometryError("polygon centroid is not interior")
    diam = float(np.sqrt(((v[:, None, :] - v[None, :, :]) ** 2).sum(-1).max()))
    r_round = round_frac * inradius
    beta = beta_factor / r_round
    mu = mu_frac / diam

    def g(x):
        x = np.atleast_2d(x)
        ell = x @ normals.T - offsets
        m = ell.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(beta * (ell - m)).sum(axis=1)) / beta
        quad = 0.5 * mu * ((x - centroid) ** 2).sum(axis=1)
        return lse + quad

    phis = 2.0 * np.pi * np.arange(_CURVE_TABLE) / _CURVE_TABLE
    table = vector_ray_roots(g, centroid, phis, diam)
    return BoundaryCurve(centroid, table)


# ---------------------------------------------------------------------------
# Defining functions
# ---------------------------------------------------------------------------

class DefiningFunction:
    """h with analytic gradient and packed Hessian; h < 0 inside, 0 on the boundary."""

    kind = "generic"

    def __init__(self):
        self.theta = None
        self.h_min = None
        self.argmin = None
        self.diameter = None
        self.volume = None
        self.descriptor = None
        self._bbox = None
        self._curve = None

    # subclasses implement _value/_gradient/_hessian on (m, 2) arrays
    def _prep(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        pts = np.atleast_2d(x)
        if self._bbox is not None:
            lo, hi = self._bbox
            if ((pts < lo) | (pts > hi)).any():
                bad = pts[((pts < lo) | (pts > hi)).any(axis=1)][0]
                raise DomainExceededError(
                    f"point {bad} outside the evaluation box {lo}..{hi}")
        return pts, squeeze

    def value(self, x):
        pts, squeeze = self._prep(x)
        out = self._value(pts)
        return out[0] if squeeze else out

    def gradient(self, x):
        pts, squeeze = self._prep(x)
        out = self._gradient(pts)
        return out[0] if squeeze else out

    def hessian(self, x):
        pts, squeeze = self._prep(x)
        out = self._hessian(pts)
        return out[0] if squeeze else out

    def evaluate(self, x):
        return self.value(x), self.gradient(x), self.hessian(x)

    def boundary_curve(self):
        if self._curve is None:
            phis = 2.0 * np.pi * np.arange(_CURVE_TABLE) / _CURVE_TABLE
            table = vector_ray_roots(lambda p: self._value(p), self.argmin, phis,
                                     self.diameter or 1.0)
            self._curve = BoundaryCurve(self.argmin, table)
        return self._curve


class EllipseFunction(DefiningFunction):
    kind = "ellipse"

    def __init__(self, center, a, b, rotation=0.0):
        super().__init__()
        self.center = np.asarray(center, dtype=float)
        self.a, self.b, self.rotation = float(a), float(b), float(rotation)
        cr, sr = math.cos(rotation), math.sin(rotation)
        rot = np.array([[cr, -sr], [sr, cr]])
        self._S = rot @ np.diag([1.0 / a ** 2, 1.0 / b ** 2]) @ rot.T
        self.h_min = -1.0
        self.argmin = self.center.copy()
        self.diameter = 2.0 * max(a, b)
        self.volume = math.pi * a * b
        self.theta = 2.0 / max(a, b) ** 2
        m = 2.0 * self.diameter
        self._bbox = (self.center - m, self.center + m)

    def _value(self, pts):
        d = pts - self.center
        return np.einsum("ij,jk,ik->i", d, self._S, d) - 1.0

    def _gradient(self, pts):
        return 2.0 * (pts - self.center) @ self._S

    def _hessian(self, pts):
        s = self._S
        return np.broadcast_to(
            2.0 * np.array([s[0, 0], s[0, 1], s[1, 1]]), (len(pts), 3)).copy()

    def boundary_curve(self):
        if self._curve is None:
            theta = 2.0 * np.pi * np.arange(_CURVE_TABLE) / _CURVE_TABLE
            u = np.column_stack([np.cos(theta), np.sin(theta)])
            q = np.einsum("ij,jk,ik->i", u, self._S, u)
            self._curve = BoundaryCurve(self.center, 1.0 / np.sqrt(q))
        return self._curve


class SuperellipseFunction(DefiningFunction):
    kind = "superellipse"

    def __init__(self, center, a, b, p, rotation=0.0):
        super().__init__()
        self.center = np.asarray(center, dtype=float)
        self.a, self.b, self.p, self.rotation = float(a), float(b), float(p), float(rotation)
        cr, sr = math.cos(rotation), math.sin(rotation)
        self._rot = np.array([[cr, -sr], [sr, cr]])
        self.h_min = -1.0
        self.argmin = self.center.copy()
        self.volume = (4.0 * a * b * _gamma_fn(1.0 + 1.0 / p) ** 2
                       / _gamma_fn(1.0 + 2.0 / p))
        m = 4.0 * max(a, b)
        self._bbox = (self.center - m, self.center + m)
        self.diameter = 2.0 * max(a, b)   # refined below from the curve
        curve = self.boundary_curve()
        self.diameter = 2.0 * float(
            np.hypot(*(curve._scan_points - self.center).T).max())

    def _xi(self, pts):
        return (pts - self.center) @ self._rot   # row-vector times R == R^T x

    def _value(self, pts):
        xi = self._xi(pts)
        return (np.abs(xi[:, 0] / self.a) ** self.p
                + np.abs(xi[:, 1] / self.b) ** self.p - 1.0)

    def _gradient(self, pts):
        xi = self._xi(pts)
        g1 = (self.p / self.a) * np.sign(xi[:, 0]) * np.abs(xi[:, 0] / self.a) ** (self.p - 1)
        g2 = (self.p / self.b) * np.sign(xi[:, 1]) * np.abs(xi[:, 1] / self.b) ** (self.p - 1)
        return np.column_stack([g1, g2]) @ self._rot.T

    def _hessian(self, pts):
        xi = self._xi(pts)
        p = self.p
        d1 = (p * (p - 1) / self.a ** 2) * np.abs(xi[:, 0] / self.a) ** (p - 2)
        d2 = (p * (p - 1) / self.b ** 2) * np.abs(xi[:, 1] / self.b) ** (p - 2)
        r = self._rot
        hxx = r[0, 0] ** 2 * d1 + r[0, 1] ** 2 * d2
        hxy = r[0, 0] * r[1, 0] * d1 + r[0, 1] * r[1, 1] * d2
        hyy = r[1, 0] ** 2 * d1 + r[1, 1] ** 2 * d2
        return np.column_stack([hxx, hxy, hyy])


class BlendedBoundaryFunction(DefiningFunction):
    """Two-piece uniformly convex h: boundary part from the distance to the
    curve, interior part an exact paraboloid about the anchor, joined by a
    convex C^2 blend. Near-infimum sublevels are exact balls; inf = -eps/2.
    """

    kind = "blended"

    def __init__(self, curve, eps, x0, diam):
        super().__init__()
        self.curve = curve
        self.eps = float(eps)
        self.x0 = np.asarray(x0, dtype=float)
        self.diam_curve = float(diam)
        self.h_min = -0.5 * self.eps
        self.argmin = self.x0.copy()
        self.diameter = self.diam_curve
        table_max = np.abs(curve.table).max()
        m = 2.0 * self.diam_curve + table_max
        self._bbox = (curve.center - m, curve.center + m)
        theta = curve._scan_theta
        self.volume = 0.5 * float(
            (curve.radius(theta) ** 2).mean()) * 2.0 * np.pi
        self._curve = curve

    def _pieces(self, pts):
        d, theta, foot = self.curve.signed_inner_distance(pts)
        dd = self.diam_curve
        h1 = d * d / (4.0 * dd) - d
        rel = pts - self.x0
        h2 = self.eps * (rel * rel).sum(-1) / (4.0 * dd * dd) - 0.5 * self.eps
        return d, theta, h1, h2, rel

    def _value(self, pts):
        _, _, h1, h2, _ = self._pieces(pts)
        phi, _, _ = blending_phi(0.5 * (h1 - h2), self.eps)
        return 0.5 * (h1 + h2) + phi

    def _grad_pieces(self, pts):
        d, theta, h1, h2, rel = self._pieces(pts)
        _, nu = self.curve.tangent_normal(theta)
        dd = self.diam_curve
        g1 = (1.0 - d / (2.0 * dd))[:, None] * nu
        g2 = self.eps * rel / (2.0 * dd * dd)
        return d, theta, h1, h2, nu, g1, g2

    def _gradient(self, pts):
        _, _, h1, h2, _, g1, g2 = self._grad_pieces(pts)
        _, dphi, _ = blending_phi(0.5 * (h1 - h2), self.eps)
        w = dphi[:, None]
        return 0.5 * ((1.0 + w) * g1 + (1.0 - w) * g2)

    def _hessian(self, pts):
        d, theta, h1, h2, nu, g1, g2 = self._grad_pieces(pts)
        _, dphi, ddphi = blending_phi(0.5 * (h1 - h2), self.eps)
        dd = self.diam_curve
        n = len(pts)
        hess1 = np.zeros((n, 3))
        active = 1.0 + dphi > 0.0
        if active.any():
            kap = self.curve.curvature(theta[active])
            da = d[active]
            denom = 1.0 - kap * da
            if (denom <= 0).any():
                bad = pts[active][denom <= 0][0]
                raise ConstructionError(
                    "boundary-distance Hessian invalid (medial axis reached)", point=bad)
            nua = nu[active]
            tau = np.column_stack([-nua[:, 1], nua[:, 0]])
            fac = (1.0 - da / (2.0 * dd)) * kap / denom
            hess1[active] = (np.column_stack([nua[:, 0] ** 2,
                                              nua[:, 0] * nua[:, 1],
                                              nua[:, 1] ** 2]) / (2.0 * dd)
                             + fac[:, None] * np.column_stack([tau[:, 0] ** 2,
                                                               tau[:, 0] * tau[:, 1],
                                                               tau[:, 1] ** 2]))
        c2 = self.eps / (2.0 * dd * dd)
        hess2 = np.zeros((n, 3))
        hess2[:, 0] = c2
        hess2[:, 2] = c2
        w = dphi[:, None]
        dg = g1 - g2
        cross = np.column_stack([dg[:, 0] ** 2, dg[:, 0] * dg[:, 1], dg[:, 1] ** 2])
        return (0.5 * ((1.0 + w) * hess1 + (1.0 - w) * hess2)
                + 0.25 * ddphi[:, None] * cross)


class _ScaledFunction(DefiningFunction):
    """h scaled in value so that inf = -1 (geometry untouched)."""

    def __init__(self, base, scale):
        super().__init__()
        self.base = base
        self.scale = float(scale)
        self.kind = base.kind
        self.h_min = base.h_min * scale
        self.argmin = base.argmin
        self.diameter = base.diameter
        self.volume = base.volume
        self._bbox = base._bbox
        self._curve = base._curve

    def _value(self, pts):
        return self.scale * self.base._value(pts)

    def _gradient(self, pts):
        return self.scale * self.base._gradient(pts)

    def _hessian(self, pts):
        return self.scale * self.base._hessian(pts)


class _OffsetFunction(DefiningFunction):
    """Restriction of h - (t - 1) to its negative set (sublevel member)."""

    def __init__(self, base, t):
        super().__init__()
        self.base = base
        self.t = float(t)
        self.offset = self.t - 1.0
        self.kind = base.kind
        self.theta = base.theta
        self.h_min = base.h_min - self.offset
        self.argmin = base.argmin
        self._bbox = base._bbox
        self.descriptor = None
        self._curve = None
        self._metrics_done = False
        self.diameter = None
        self.volume = None
        self._ensure_metrics()

    def _ensure_metrics(self):
        if self._metrics_done:
            return
        self.diameter = self.base.diameter   # bracket scale for the ray solve
        curve = self.boundary_curve()
        self.diameter = curve.diameter()
        theta = curve._scan_theta
        self.volume = 0.5 * float((curve.radius(theta) ** 2).mean()) * 2.0 * np.pi
        self._metrics_done = True

    def _value(self, pts):
        return self.base._value(pts) - self.offset

    def _gradient(self, pts):
        return self.base._gradient(pts)

    def _hessian(self, pts):
        return self.base._hessian(pts)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def blending_phi(s, eps):
    """Even convex C^2 blend with phi(s) = |s| for |s| >= eps/16.

    On the matching interval the profile is the even quartic
    3a/8 + 3 s^2/(4a) - s^4/(8 a^3), a = eps/16; its second derivative
    (3/2a)(1 - s^2/a^2) is nonnegative there and the value, slope, and
    curvature all match |s| at s = +-a.
    """
    a = eps / 16.0
    s = np.asarray(s, dtype=float)
    outside = np.abs(s) >= a
    phi = np.where(outside, np.abs(s),
                   3.0 * a / 8.0 + 0.75 * s * s / a - s ** 4 / (8.0 * a ** 3))
    dphi = np.where(outside, np.sign(s), 1.5 * s / a - 0.5 * s ** 3 / a ** 3)
    ddphi = np.where(outside, 0.0, 1.5 / a * (1.0 - s * s / (a * a)))
    return phi, dphi, ddphi


def _curve_for_descriptor(desc):
    if desc.kind == "smoothed_polygon":
        return _smoothed_polygon_curve(desc.vertices)
    if desc.kind == "ellipse":
        return EllipseFunction(desc.center, desc.a, desc.b, desc.rotation).boundary_curve()
    return SuperellipseFunction(desc.center, desc.a, desc.b, desc.p,
                                desc.rotation).boundary_curve()


def build_appendix_h(domain, eps=None, x0=None):
    """Two-piece defining function for any uniformly convex boundary.

    Returns the raw (unnormalized) function with inf = -eps/2; the descriptor
    builder rescales to inf = -1. ``eps`` defaults to half the anchor depth
    capped at half the minimal boundary curvature radius (the boundary part
    must stay convex throughout the blend collar, which the builder verifies
    by Hessian sampling).
    """
    curve = domain if isinstance(domain, BoundaryCurve) else _curve_for_descriptor(domain)
    if x0 is None:
        x0 = getattr(domain, "anchor", None)
    x0 = np.asarray(curve.center if x0 is None else x0, dtype=float)

    _, _, dist0 = curve.foot_point(x0[None, :])
    depth = float(dist0[0])
    if not curve.contains(x0[None, :])[0]:
        raise ConstructionError(f"anchor {x0} is not inside the domain", point=x0)
    kap_max = curve.max_curvature()
    if eps is None:
        eps = min(0.5 * depth, 0.5 / kap_max)
    eps = float(eps)
    if depth <= eps:
        raise ConstructionError(
            f"anchor depth {depth:.3e} must exceed eps={eps:.3e}", point=x0)

    diam = curve.diameter()
    h = BlendedBoundaryFunction(curve, eps, x0, diam)

    # verify convexity of the boundary piece throughout the blend collar
    thetas = 2.0 * np.pi * np.arange(64) / 64
    depths = eps * (np.arange(1, 9) / 9.0)
    base = curve.point(thetas)
    _, nu = curve.tangent_normal(thetas)
    samples = (base[None, :, :] - depths[:, None, None] * nu[None, :, :]).reshape(-1, 2)
    samples = samples[h._value(samples) < 0.0]
    if len(samples):
        hs = h._hessian(samples)
        lam_min = (0.5 * (hs[:, 0] + hs[:, 2])
                   - np.hypot(0.5 * (hs[:, 0] - hs[:, 2]), hs[:, 1]))
        worst = int(np.argmin(lam_min))
        if lam_min[worst] <= 0.0:
            raise ConstructionError(
                f"eps={eps:.3e} too large: boundary piece loses convexity "
                f"(min Hessian eigenvalue {lam_min[worst]:.3e})",
                point=samples[worst])
    h.eps_used = eps
    return h


def _measure_theta(df, n_samples=_THETA_SAMPLES):
    rng = np.random.default_rng(_THETA_SEED)
    curve = df.boundary_curve()
    lo = curve._scan_points.min(axis=0)
    hi = curve._scan_points.max(axis=0)
    samples = []
    needed = n_samples
    for _ in range(200):
        cand = rng.uniform(lo, hi, size=(2 * needed + 64, 2))
        keep = cand[df._value(cand) < -1e-12]
        samples.append(keep)
        needed -= len(keep)
        if needed <= 0:
            break
    pts = np.concatenate(samples)[:n_samples]
    h = df._hessian(pts)
    lam_min = 0.5 * (h[:, 0] + h[:, 2]) - np.hypot(0.5 * (h[:, 0] - h[:, 2]), h[:, 1])
    worst = int(np.argmin(lam_min))
    if lam_min[worst] <= 0.0:
        raise ConstructionError(
            f"sampled Hessian eigenvalue {lam_min[worst]:.3e} <= 0",
            point=pts[worst])
    return float(lam_min[worst])


def build_defining_function(descriptor, theta_samples=_THETA_SAMPLES):
    """DefiningFunction for a descriptor, normalized so that inf h = -1."""
    if descriptor.kind == "ellipse":
        df = EllipseFunction(descriptor.center, descriptor.a, descriptor.b,
                             descriptor.rotation)
    elif descriptor.kind == "superellipse":
        df = SuperellipseFunction(descriptor.center, descriptor.a, descriptor.b,
                                  descriptor.p, descriptor.rotation)
    else:
        raw = build_appendix_h(descriptor, eps=descriptor.epsilon)
        df = _ScaledFunction(raw, 2.0 / raw.eps_used)
        df.eps_used = raw.eps_used
    df.descriptor = descriptor
    df.theta = _measure_theta(df, theta_samples)
    if descriptor.anchor is not None:
        if df.value(np.asarray(descriptor.anchor, dtype=float)) >= 0.0:
            raise GeometryError(f"anchor {descriptor.anchor} is not interior")
    return df


def sublevel_family(df, t):
    """Member {h <= t-1} of the shrinking family, as a defining function."""
    if not (0.0 < t <= 1.0):
        raise ValueError(f"sublevel parameter must lie in (0, 1], got {t}")
    if t == 1.0:
        return df
    return _OffsetFunction(df, t)


@dataclass
class DomainMetrics:
    volume: float
    diameter: float
    boundary_points: np.ndarray
    boundary_normals: np.ndarray


def domain_metrics(domain, n_boundary=256):
    """Volume, diameter, and the outward unit normal on boundary samples."""
    df = build_defining_function(domain) if isinstance(domain, DomainDescriptor) else domain
    curve = df.boundary_curve()
    theta = 2.0 * np.pi * np.arange(n_boundary) / n_boundary
    pts = curve.point(theta)
    grad = df.gradient(pts)
    normals = grad / np.hypot(grad[:, 0], grad[:, 1])[:, None]
    volume = 0.5 * float((curve.radius(theta) ** 2).mean()) * 2.0 * np.pi
    return DomainMetrics(volume=volume, diameter=curve.diameter(),
                         boundary_points=pts, boundary_normals=normals)


def distance_to_boundary(domain, points):
    """Distance to the domain boundary for points in the closed domain."""
    df = build_defining_function(domain) if isinstance(domain, DomainDescriptor) else domain
    curve = df.boundary_curve()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d, _, _ = curve.signed_inner_distance(pts)
    tol = 1e-9 * (df.diameter or 1.0)
    if (d < -tol).any():
        raise DomainExceededError(
            f"point {pts[np.argmin(d)]} lies outside the domain")
    out = np.maximum(d, 0.0)
    return out[0] if np.asarray(points).ndim == 1 else out


def eval_defining(df, x):
    """(value, gradient, Hessian) of a defining function at x."""
    return df.evaluate(x)
