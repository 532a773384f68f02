"""Matrix algebra of the arctan-eigenvalue operator on symmetric 2x2 matrices.

Symmetric matrices are stored packed as ndarrays of shape (..., 3) holding
(m11, m12, m22); only the three independent entries exist, so symmetry is
exact by storage. Eigenvalues come from the closed trace/determinant form,
never an iterative solver. The arctan sum itself is dimension-generic; the
packed layout pins the implementation to the plane.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "sym2",
    "sym_from_full",
    "sym_to_full",
    "sym_eigvals",
    "sym_trace_product",
    "sym_is_positive_definite",
    "lagrangian_angle",
    "angle_coefficients",
    "angle_derivative",
    "PsiProfile",
    "build_psi_profile",
    "psi_value",
    "concavified_angle",
    "uniqueness_matrix",
    "legendre_transform",
]


def sym2(m11, m12, m22):
    """Pack entries into the (..., 3) symmetric-matrix layout."""
    return np.stack(np.broadcast_arrays(
        np.asarray(m11, dtype=float),
        np.asarray(m12, dtype=float),
        np.asarray(m22, dtype=float)), axis=-1)


def sym_from_full(m):
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 0, 0],
                     0.5 * (m[..., 0, 1] + m[..., 1, 0]),
                     m[..., 1, 1]], axis=-1)


def sym_to_full(p):
    p = np.asarray(p, dtype=float)
    out = np.empty(p.shape[:-1] + (2, 2))
    out[..., 0, 0] = p[..., 0]
    out[..., 0, 1] = p[..., 1]
    out[..., 1, 0] = p[..., 1]
    out[..., 1, 1] = p[..., 2]
    return out


def sym_eigvals(m):
    """Eigenvalues in ascending order, closed form (stable for near-multiple pairs)."""
    m = np.asarray(m, dtype=float)
    mean = 0.5 * (m[..., 0] + m[..., 2])
    dev = np.hypot(0.5 * (m[..., 0] - m[..., 2]), m[..., 1])
    return np.stack([mean - dev, mean + dev], axis=-1)


def sym_trace_product(a, b):
    """trace(A @ B) for packed symmetric matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] + 2.0 * a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def sym_is_positive_definite(m):
    m = np.asarray(m, dtype=float)
    det = m[..., 0] * m[..., 2] - m[..., 1] ** 2
    return (m[..., 0] > 0.0) & (det > 0.0)


def lagrangian_angle(m):
    """Sum of arctan of the eigenvalues; values in (-n*pi/2, n*pi/2) with n = 2."""
    return np.arctan(sym_eigvals(m)).sum(axis=-1)


def angle_coefficients(m):
    """Packed (I + M^2)^{-1}: the coefficient matrix of the linearized operator.

    Always symmetric positive definite, commutes with M, eigenvalues 1/(1+lambda^2).
    """
    m = np.asarray(m, dtype=float)
    m11, m12, m22 = m[..., 0], m[..., 1], m[..., 2]
    p = 1.0 + m11 ** 2 + m12 ** 2
    q = m12 * (m11 + m22)
    r = 1.0 + m22 ** 2 + m12 ** 2
    det = p * r - q * q
    return np.stack([r / det, -q / det, p / det], axis=-1)


def angle_derivative(m, m_dot):
    """Directional derivative of the angle: trace[(I + M^2)^{-1} M_dot]."""
    return sym_trace_product(angle_coefficients(m), m_dot)


# ---------------------------------------------------------------------------
# Concavified eigenvalue profile
# ---------------------------------------------------------------------------

_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(32)


def _smoothstep(t):
    """C^2 quintic ramp: 0 at t<=0, 1 at t>=1, zero first/second derivatives at ends."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _segment_integral(f, a, b):
    """Gauss-Legendre integral of f over per-element intervals [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)[..., None]
    half = 0.5 * (b - a)[..., None]
    nodes = mid + half * _GAUSS_NODES
    return (f(nodes) * _GAUSS_WEIGHTS).sum(axis=-1) * (b - a) * 0.5


class PsiProfile:
    """Concave replacement for arctan, exact on the eigenvalue window [lo, hi].

    psi'' = arctan''(s) * eta(s) with eta a C^2 bump that is 1 on [lo, hi] and 0
    outside [0, 2*hi]; psi is normalized by psi(1) = pi/4, psi'(1) = 1/2, which
    makes psi coincide with arctan on the whole window. Then 1/(1+4*hi^2) <=
    psi' <= 1 and psi'' <= 0 everywhere.
    """

    def __init__(self, lo, hi):
        if not (0.0 < lo < 1.0 < hi):
            raise ValueError(f"need 0 < lo < 1 < hi, got lo={lo}, hi={hi}")
        self.lo = float(lo)
        self.hi = float(hi)
        # anchors at the window ends and the linear tails
        self._psi_lo = np.arctan(self.lo)
        self._dpsi_lo = 1.0 / (1.0 + self.lo ** 2)
        self._psi_hi = np.arctan(self.hi)
        self._dpsi_hi = 1.0 / (1.0 + self.hi ** 2)
        self._dpsi_0 = self._dpsi_lo - float(_segment_integral(self._ddpsi, 0.0, self.lo))
        self._psi_0 = self._psi_lo - self._dpsi_lo * self.lo + float(
            _segment_integral(lambda t: t * self._ddpsi(t), 0.0, self.lo))
        self._dpsi_top = self._dpsi_hi + float(_segment_integral(self._ddpsi, self.hi, 2.0 * self.hi))
        self._psi_top = self._psi_hi + self._dpsi_hi * self.hi + float(
            _segment_integral(lambda t: (2.0 * self.hi - t) * self._ddpsi(t), self.hi, 2.0 * self.hi))

    def eta(self, s):
        s = np.asarray(s, dtype=float)
        ramp_up = _smoothstep(s / self.lo)
        ramp_down = _smoothstep((2.0 * self.hi - s) / self.hi)
        return np.where(s <= self.lo, ramp_up, np.where(s < self.hi, 1.0, ramp_down))

    def _ddpsi(self, s):
        return -2.0 * s / (1.0 + s * s) ** 2 * self.eta(s)

    def value(self, s):
        """Return (psi, psi', psi'') elementwise."""
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        psi = np.empty_like(s)
        dpsi = np.empty_like(s)
        ddpsi = self._ddpsi(s)

        window = (s >= self.lo) & (s <= self.hi)
        psi[window] = np.arctan(s[window])
        dpsi[window] = 1.0 / (1.0 + s[window] ** 2)

        left = (s >= 0.0) & (s < self.lo)
        if left.any():
            sl = s[left]
            dpsi[left] = self._dpsi_lo - _segment_integral(self._ddpsi, sl, self.lo)
            psi[left] = (self._psi_lo + self._dpsi_lo * (sl - self.lo)
                         + _segment_integral(lambda t: (t - sl[..., None]) * self._ddpsi(t), sl, self.lo))

        neg = s < 0.0
        psi[neg] = self._psi_0 + self._dpsi_0 * s[neg]
        dpsi[neg] = self._dpsi_0

        right = (s > self.hi) & (s <= 2.0 * self.hi)
        if right.any():
            sr = s[right]
            dpsi[right] = self._dpsi_hi + _segment_integral(self._ddpsi, self.hi, sr)
            psi[right] = (self._psi_hi + self._dpsi_hi * (sr - self.hi)
                          + _segment_integral(lambda t: (sr[..., None] - t) * self._ddpsi(t), self.hi, sr))

        tail = s > 2.0 * self.hi
        psi[tail] = self._psi_top + self._dpsi_top * (s[tail] - 2.0 * self.hi)
        dpsi[tail] = self._dpsi_top

        if scalar:
            return psi[0], dpsi[0], ddpsi.reshape(-1)[0]
        return psi, dpsi, ddpsi


def build_psi_profile(lo, hi):
    if lo >= hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    return PsiProfile(lo, hi)


def psi_value(profile, s):
    return profile.value(s)


def concavified_angle(profile, m):
    """Sum of psi over the eigenvalues; equals lagrangian_angle on the window."""
    lam = sym_eigvals(m)
    psi, _, _ = profile.value(lam)
    return psi.sum(axis=-1)


# ---------------------------------------------------------------------------
# Segment-averaged coefficient matrix (uniqueness comparison)
# ---------------------------------------------------------------------------

def uniqueness_matrix(m1, m2, quad_points=16):
    """Integral of [I + (s*M2 + (1-s)*M1)^2]^{-1} ds over s in [0, 1].

    Symmetric positive definite; satisfies the mean-value identity
    trace(B (M2 - M1)) = F(M2) - F(M1) up to quadrature error.
    """
    if quad_points < 2:
        raise ValueError("quad_points must be >= 2")
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    nodes, weights = leggauss(int(quad_points))
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    out = np.zeros(np.broadcast_shapes(m1.shape, m2.shape))
    for si, wi in zip(s, w):
        out = out + wi * angle_coefficients(m1 + si * (m2 - m1))
    return out


# ---------------------------------------------------------------------------
# Numerical convex conjugate
# ---------------------------------------------------------------------------

def legendre_transform(u_field, target_grid, tol=1e-11, max_iter=60):
    """Convex conjugate v(y) = <x, y> - u(x) at the nodes of ``target_grid``.

    The point x solves grad u(x) = y; it is found by damped Newton on a smooth
    chart interpolant of u, seeded from the discrete conjugate argmax. Requires
    D^2 u positive definite at all nodes of u's grid.

    Returns a GridField on ``target_grid``.
    """
    from .grid import ChartInterpolant, GridField
    from .errors import GeometryError

    grid = u_field.grid
    values = u_field.values
    hess = grid.hessian(values)
    if not sym_is_positive_definite(hess).all():
        raise GeometryError("legendre_transform: u is not convex on its grid")

    interp = ChartInterpolant(grid, values)
    targets = target_grid.nodes
    # discrete conjugate argmax as the Newton seed
    scores = targets @ grid.nodes.T - values[None, :]
    seeds = grid.nodes[np.argmax(scores, axis=1)]

    scale = max(grid.radius.max(), 1.0)
    v = np.empty(len(targets))
    for k, (y, x0) in enumerate(zip(targets, seeds)):
        x = x0.copy()
        err = np.inf
        for _ in range(max_iter):
            g = interp.gradient(x[None, :])[0]
            r = g - y
            err = np.hypot(r[0], r[1])
            if err <= tol * scale:
                break
            h = sym_to_full(interp.hessian(x[None, :])[0])
            step = np.linalg.solve(h, r)
            alpha = 1.0
            for _ in range(30):
                cand = x - alpha * step
                cand = grid.clamp_to_chart(cand)
                g_new = interp.gradient(cand[None, :])[0]
                if np.hypot(*(g_new - y)) < err:
                    x = cand
                    break
                alpha *= 0.5
            else:
                break
        if err > 1e-6 * scale:
            raise GeometryError(
                f"legendre_transform: target point {y} outside the range of grad u "
                f"(best gradient mismatch {err:.3e})")
        v[k] = x @ y - float(interp.value(x[None, :])[0])
    return GridField(target_grid, v)
