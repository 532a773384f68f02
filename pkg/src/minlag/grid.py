"""Boundary-fitted polar discretization of a convex domain.

The chart is x(rho, phi) = anchor + rho * r(phi) * (cos phi, sin phi) with
rho uniform on [0, 1] and phi uniform periodic; r(phi) solves h = 0 along
each ray. Node 0 is the single shared center node; ring i, angle j sits at
flat index 1 + (i-1)*n_phi + j.

Cartesian derivatives use second-order stencils in the chart mapped by the
chain rule. The metric terms are built by applying difference operators to
the node coordinates themselves (first-derivative metric from the full-step
stencil, second-derivative metric from the half-step trigonometric
derivative of the radius table, whose square is exactly the three-point
second-difference symbol). This discrete-geometry pairing makes gradients
and Hessians exact on affine fields and exact on radial quadratics over
single-harmonic (circular) charts, while remaining second-order otherwise.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq

from .errors import GeometryError

__all__ = [
    "RadialGrid",
    "GridField",
    "build_grid",
    "gradient",
    "hessian",
    "integrate",
    "pole_patch",
    "ChartInterpolant",
    "write_field_csv",
    "read_field_csv",
]


def _eval_trig(coeffs, n, phi, deriv=0):
    """Evaluate the trigonometric interpolant of a length-n periodic table.

    ``coeffs`` is np.fft.rfft of the table. Odd derivatives zero the Nyquist
    mode (its phase at half-integer shifts is ambiguous).
    """
    k = np.arange(n // 2 + 1)
    fac = (1j * k) ** deriv if deriv else np.ones_like(k, dtype=complex)
    w = np.full(n // 2 + 1, 2.0 / n)
    w[0] = 1.0 / n
    if n % 2 == 0:
        w[-1] = 1.0 / n
        if deriv % 2 == 1:
            fac = fac.copy()
            fac[-1] = 0.0
    phi = np.asarray(phi, dtype=float)
    e = np.exp(1j * phi[..., None] * k)
    return (e * (w * fac * coeffs)).real.sum(axis=-1)


def _halfstep_derivative(table, dphi):
    """Spectral central difference on the staggered half-step grid.

    Per harmonic k the symbol is i*sin(k*dphi/2)/(dphi/2); applied twice it
    reproduces the exact three-point second-difference symbol.
    """
    n = table.shape[0]
    k = np.arange(n // 2 + 1)
    factor = 1j * np.sin(k * dphi / 2.0) / (dphi / 2.0)
    if n % 2 == 0:
        factor[-1] = 0.0
    spec = np.fft.rfft(table, axis=0)
    return np.fft.irfft(spec * factor.reshape((-1,) + (1,) * (table.ndim - 1)),
                        n=n, axis=0)


@dataclass
class GridField:
    """Scalar values, one per grid node."""

    grid: "RadialGrid"
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field length {self.values.shape} != node count {self.grid.n_nodes}")
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")


def _values_of(field):
    return field.values if isinstance(field, GridField) else np.asarray(field, dtype=float)


class RadialGrid:
    """Immutable boundary-fitted grid with precomputed derivative operators."""

    def __init__(self, df, anchor, n_rho, n_phi, radius):
        self.df = df
        self.anchor = np.asarray(anchor, dtype=float)
        self.n_rho = int(n_rho)
        self.n_phi = int(n_phi)
        self.radius = np.asarray(radius, dtype=float)
        self.n_nodes = 1 + self.n_rho * self.n_phi
        self.drho = 1.0 / self.n_rho
        self.dphi = 2.0 * np.pi / self.n_phi
        self.phi = self.dphi * np.arange(self.n_phi)
        self._radius_rfft = np.fft.rfft(self.radius)

        self._build_geometry()
        self._build_operators()

    # -- construction -----------------------------------------------------

    def _build_geometry(self):
        nr, np_ = self.n_rho, self.n_phi
        u = np.column_stack([np.cos(self.phi), np.sin(self.phi)])
        c = self.radius[:, None] * u              # d x / d rho along each ray
        rho = self.drho * np.arange(1, nr + 1)

        nodes = np.empty((self.n_nodes, 2))
        nodes[0] = self.anchor
        nodes[1:] = (self.anchor + rho[:, None, None] * c[None, :, :]).reshape(-1, 2)
        self.nodes = nodes
        self.rho_of_node = np.concatenate([[0.0], np.repeat(rho, np_)])
        self.phi_of_node = np.concatenate([[0.0], np.tile(self.phi, nr)])

        self.boundary_index = 1 + (nr - 1) * np_ + np.arange(np_)
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_index] = False
        self.interior_index = np.nonzero(mask)[0]

        # quadrature: trapezoid in rho (exact on the linear measure rho drho)
        w_rho = np.full(nr, self.drho)
        w_rho[-1] = 0.5 * self.drho
        w = np.zeros(self.n_nodes)
        w[1:] = (self.dphi * (w_rho * rho)[:, None]
                 * (self.radius ** 2)[None, :]).ravel()
        self.weights = w
        self.volume = float(w.sum())
        self.mesh_size = float(max(self.radius.max() * self.drho,
                                   self.radius.max() * self.dphi))
        self._c_table = c

    def _ring_index(self, i, j):
        return 1 + (i - 1) * self.n_phi + (j % self.n_phi)

    def _chart_stencils(self):
        """Sparse chart-derivative operators; pole rows are left zero."""
        nr, np_ = self.n_rho, self.n_phi
        dr, dp = self.drho, self.dphi
        N = self.n_nodes

        def coo(rows, cols, vals):
            return sparse.coo_matrix(
                (np.concatenate(vals),
                 (np.concatenate(rows), np.concatenate(cols))),
                shape=(N, N)).tocsr()

        jj = np.arange(np_)

        # D_rho: centered inside, 3-point one-sided on the boundary ring
        ii, jm = np.meshgrid(np.arange(1, nr), jj, indexing="ij")
        ii, jm = ii.ravel(), jm.ravel()
        row_c = self._ring_index(ii, jm)
        up = self._ring_index(ii + 1, jm)
        dn = np.where(ii == 1, 0, self._ring_index(np.maximum(ii - 1, 1), jm))
        rb = self._ring_index(nr, jj)
        d_rho = coo(
            [row_c, row_c, rb, rb, rb],
            [up, dn, rb, self._ring_index(nr - 1, jj), self._ring_index(nr - 2, jj)],
            [np.full(row_c.size, 0.5 / dr), np.full(row_c.size, -0.5 / dr),
             np.full(np_, 1.5 / dr), np.full(np_, -2.0 / dr), np.full(np_, 0.5 / dr)])

        # D_rho_rho: centered inside, 4-point one-sided (second order) at the boundary
        d_rho2 = coo(
            [row_c, row_c, row_c, rb, rb, rb, rb],
            [up, row_c, dn,
             rb, self._ring_index(nr - 1, jj), self._ring_index(nr - 2, jj),
             self._ring_index(nr - 3, jj)],
            [np.full(row_c.size, 1.0 / dr ** 2), np.full(row_c.size, -2.0 / dr ** 2),
             np.full(row_c.size, 1.0 / dr ** 2),
             np.full(np_, 2.0 / dr ** 2), np.full(np_, -5.0 / dr ** 2),
             np.full(np_, 4.0 / dr ** 2), np.full(np_, -1.0 / dr ** 2)])

        # D_phi, D_phi_phi: periodic centered on every ring
        ii, jm = np.meshgrid(np.arange(1, nr + 1), jj, indexing="ij")
        ii, jm = ii.ravel(), jm.ravel()
        rowp = self._ring_index(ii, jm)
        east = self._ring_index(ii, jm + 1)
        west = self._ring_index(ii, jm - 1)
        d_phi = coo([rowp, rowp], [east, west],
                    [np.full(rowp.size, 0.5 / dp), np.full(rowp.size, -0.5 / dp)])
        d_phi2 = coo([rowp, rowp, rowp], [east, rowp, west],
                     [np.full(rowp.size, 1.0 / dp ** 2),
                      np.full(rowp.size, -2.0 / dp ** 2),
                      np.full(rowp.size, 1.0 / dp ** 2)])
        return d_rho, d_rho2, d_phi, d_phi2

    def _pole_rows(self):
        """Center-node derivative rows from polynomial fits along pole lines.

        Each line pairs a ray with its antipode (n_phi must be even); a quartic
        fit through center +/- two rings gives directional first and second
        derivatives, combined into Cartesian values by discrete Fourier fits
        over the line directions.
        """
        nh = self.n_phi // 2
        N = self.n_nodes
        gx = np.zeros(N)
        gy = np.zeros(N)
        hxx = np.zeros(N)
        hxy = np.zeros(N)
        hyy = np.zeros(N)
        rho1, rho2 = self.drho, 2.0 * self.drho
        for j in range(nh):
            ja = j + nh
            s = np.array([-rho2 * self.radius[ja], -rho1 * self.radius[ja], 0.0,
                          rho1 * self.radius[j], rho2 * self.radius[j]])
            cols = np.array([self._ring_index(2, ja), self._ring_index(1, ja), 0,
                             self._ring_index(1, j), self._ring_index(2, j)])
            vand = np.vander(s, 5, increasing=True)
            winv = np.linalg.inv(vand)
            d1 = winv[1]
            d2 = 2.0 * winv[2]
            ph = self.phi[j]
            np.add.at(gx, cols, (2.0 / nh) * np.cos(ph) * d1)
            np.add.at(gy, cols, (2.0 / nh) * np.sin(ph) * d1)
            np.add.at(hxx, cols, (1.0 / nh + (2.0 / nh) * np.cos(2 * ph)) * d2)
            np.add.at(hyy, cols, (1.0 / nh - (2.0 / nh) * np.cos(2 * ph)) * d2)
            np.add.at(hxy, cols, (2.0 / nh) * np.sin(2 * ph) * d2)
        return gx, gy, hxx, hxy, hyy

    def _build_operators(self):
        nr, np_ = self.n_rho, self.n_phi
        c = self._c_table
        c1 = (np.roll(c, -1, axis=0) - np.roll(c, 1, axis=0)) / (2.0 * self.dphi)
        c2 = (np.roll(c, -1, axis=0) - 2.0 * c + np.roll(c, 1, axis=0)) / self.dphi ** 2
        c1h = _halfstep_derivative(c, self.dphi)

        d_rho, d_rho2, d_phi, d_phi2 = self._chart_stencils()
        d_rho_phi = d_phi @ d_rho

        rho = self.rho_of_node[1:].reshape(nr, np_)

        def node_diag(ring_values):
            full = np.zeros(self.n_nodes)
            full[1:] = ring_values.ravel()
            return full

        def inverse_2x2(col_a, col_b):
            # columns of J per ring node -> entries of J^{-1} (chart x cart)
            a = np.broadcast_to(col_a[None, :, 0], (nr, np_))
            ccomp = np.broadcast_to(col_a[None, :, 1], (nr, np_))
            b = rho * col_b[None, :, 0]
            d = rho * col_b[None, :, 1]
            det = a * d - b * ccomp
            k_rx = d / det
            k_ry = -b / det
            k_px = -ccomp / det
            k_py = a / det
            return k_rx, k_ry, k_px, k_py

        k1_rx, k1_ry, k1_px, k1_py = inverse_2x2(c, c1)
        k2_rx, k2_ry, k2_px, k2_py = inverse_2x2(c, c1h)

        gx = sparse.diags(node_diag(k1_rx)) @ d_rho + sparse.diags(node_diag(k1_px)) @ d_phi
        gy = sparse.diags(node_diag(k1_ry)) @ d_rho + sparse.diags(node_diag(k1_py)) @ d_phi

        pole_gx, pole_gy, pole_hxx, pole_hxy, pole_hyy = self._pole_rows()

        def with_pole_row(op, row):
            op = op.tolil()
            op[0, :] = row
            return op.tocsr()

        gx = with_pole_row(gx, pole_gx)
        gy = with_pole_row(gy, pole_gy)

        gamma_x_rp = node_diag(np.broadcast_to(c1[None, :, 0], (nr, np_)))
        gamma_y_rp = node_diag(np.broadcast_to(c1[None, :, 1], (nr, np_)))
        gamma_x_pp = node_diag(rho * c2[None, :, 0])
        gamma_y_pp = node_diag(rho * c2[None, :, 1])

        c_rr = d_rho2
        c_rp = d_rho_phi - sparse.diags(gamma_x_rp) @ gx - sparse.diags(gamma_y_rp) @ gy
        c_pp = d_phi2 - sparse.diags(gamma_x_pp) @ gx - sparse.diags(gamma_y_pp) @ gy

        def second_op(ka, kb_):
            ka_r, ka_p = ka
            kb_r, kb_p = kb_
            return (sparse.diags(node_diag(ka_r * kb_r)) @ c_rr
                    + sparse.diags(node_diag(ka_r * kb_p + ka_p * kb_r)) @ c_rp
                    + sparse.diags(node_diag(ka_p * kb_p)) @ c_pp)

        hxx = with_pole_row(second_op((k2_rx, k2_px), (k2_rx, k2_px)), pole_hxx)
        hxy = with_pole_row(second_op((k2_rx, k2_px), (k2_ry, k2_py)), pole_hxy)
        hyy = with_pole_row(second_op((k2_ry, k2_py), (k2_ry, k2_py)), pole_hyy)

        self.gx, self.gy = gx.tocsr(), gy.tocsr()
        self.hxx, self.hxy, self.hyy = hxx, hxy, hyy

    # -- field calculus ----------------------------------------------------

    def gradient(self, field):
        v = _values_of(field)
        return np.column_stack([self.gx @ v, self.gy @ v])

    def hessian(self, field):
        """Packed per-node Hessians (n_nodes, 3); exactly symmetric by storage."""
        v = _values_of(field)
        return np.column_stack([self.hxx @ v, self.hxy @ v, self.hyy @ v])

    def integrate(self, field):
        return float(self.weights @ _values_of(field))

    def mean_project(self, field):
        """Shift a field to zero integral mean."""
        v = _values_of(field).copy()
        v -= self.integrate(v) / self.volume
        return v

    # -- chart mapping -----------------------------------------------------

    def boundary_radius_at(self, phi, deriv=0):
        return _eval_trig(self._radius_rfft, self.n_phi, phi, deriv)

    def chart_coords(self, points):
        d = np.asarray(points, dtype=float) - self.anchor
        phi = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * np.pi)
        r = self.boundary_radius_at(phi)
        rho = np.hypot(d[..., 0], d[..., 1]) / r
        return rho, phi

    def point_from_chart(self, rho, phi):
        r = self.boundary_radius_at(phi)
        return self.anchor + (rho * r)[..., None] * np.stack(
            [np.cos(phi), np.sin(phi)], axis=-1)

    def clamp_to_chart(self, point, rho_max=1.0):
        rho, phi = self.chart_coords(point[None, :])
        if rho[0] <= rho_max:
            return point
        return self.point_from_chart(np.array([rho_max]), phi)[0]


def build_grid(df, n_rho, n_phi, anchor=None):
    """Build a boundary-fitted grid over the negative set of ``df``.

    Requires n_rho >= 8 and even n_phi >= 16. The anchor defaults to the
    minimizer of h and must see the boundary star-shaped (automatic for a
    convex domain and an interior anchor).
    """
    if n_rho < 8:
        raise ValueError("n_rho must be >= 8")
    if n_phi < 16 or n_phi % 2 != 0:
        raise ValueError("n_phi must be even and >= 16")
    anchor = np.asarray(df.argmin if anchor is None else anchor, dtype=float)
    if df.value(anchor[None, :])[0] >= 0.0:
        raise GeometryError(f"anchor {anchor} is not inside the domain")

    scale = getattr(df, "diameter", None) or 1.0
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    radius = np.empty(n_phi)
    for j, ph in enumerate(phi):
        ray = np.array([np.cos(ph), np.sin(ph)])

        def f(r, ray=ray):
            return float(df.value((anchor + r * ray)[None, :])[0])

        hi = 0.6 * scale
        for _ in range(60):
            if f(hi) > 0.0:
                break
            hi *= 1.5
        else:
            raise GeometryError(
                f"no boundary bracket along phi={ph:.6f} from anchor {anchor}")
        radius[j] = brentq(f, 0.0, hi, xtol=1e-14 * scale, rtol=8.9e-16)
    if not (radius > 0.0).all():
        raise GeometryError("non-positive boundary radius")
    return RadialGrid(df, anchor, n_rho, n_phi, radius)


def gradient(field):
    return field.grid.gradient(field.values)


def hessian(field):
    return field.grid.hessian(field.values)


def integrate(field):
    return field.grid.integrate(field.values)


def pole_patch(field):
    """(value, gradient, packed Hessian) at the shared center node.

    Radial stencils cross the pole to the antipodal ray, giving centered
    derivatives through the anchor.
    """
    g = field.grid
    v = field.values
    grad = np.array([g.gx[0] @ v, g.gy[0] @ v]).ravel()
    hess = np.array([g.hxx[0] @ v, g.hxy[0] @ v, g.hyy[0] @ v]).ravel()
    return v[0], grad, hess


# ---------------------------------------------------------------------------
# Smooth chart interpolation (warm starts, conjugates)
# ---------------------------------------------------------------------------

class ChartInterpolant:
    """Bicubic spline of a grid field in chart coordinates.

    Evaluation works anywhere in the chart (with polynomial extrapolation in
    rho slightly beyond the boundary); gradients and Hessians use analytic
    chart derivatives from the trigonometric radius series.
    """

    _PAD = 3

    def __init__(self, grid, values):
        values = _values_of(values)
        nr, np_ = grid.n_rho, grid.n_phi
        z = np.empty((nr + 1, np_ + 2 * self._PAD))
        ring = values[1:].reshape(nr, np_)
        body = np.vstack([np.full(np_, values[0]), ring])
        cols = np.mod(np.arange(-self._PAD, np_ + self._PAD), np_)
        z[:, :] = body[:, cols]
        rho_axis = np.linspace(0.0, 1.0, nr + 1)
        phi_axis = grid.dphi * np.arange(-self._PAD, np_ + self._PAD)
        self.grid = grid
        self._spline = RectBivariateSpline(rho_axis, phi_axis, z, kx=3, ky=3)

    def value(self, points):
        rho, phi = self.grid.chart_coords(points)
        return self._spline.ev(rho, phi)

    def _chart_jacobian(self, rho, phi):
        g = self.grid
        r = g.boundary_radius_at(phi)
        r1 = g.boundary_radius_at(phi, 1)
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        up = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
        x_rho = r[..., None] * u
        x_phi = rho[..., None] * (r1[..., None] * u + r[..., None] * up)
        return x_rho, x_phi, u, up, r, r1

    def gradient(self, points):
        rho, phi = self.grid.chart_coords(points)
        rho = np.maximum(rho, 1e-8)
        f_r = self._spline.ev(rho, phi, dx=1)
        f_p = self._spline.ev(rho, phi, dy=1)
        x_rho, x_phi, *_ = self._chart_jacobian(rho, phi)
        det = x_rho[..., 0] * x_phi[..., 1] - x_rho[..., 1] * x_phi[..., 0]
        gx = (f_r * x_phi[..., 1] - f_p * x_rho[..., 1]) / det
        gy = (-f_r * x_phi[..., 0] + f_p * x_rho[..., 0]) / det
        return np.stack([gx, gy], axis=-1)

    def hessian(self, points):
        rho, phi = self.grid.chart_coords(points)
        rho = np.maximum(rho, 1e-8)
        g = self.grid
        f_r = self._spline.ev(rho, phi, dx=1)
        f_p = self._spline.ev(rho, phi, dy=1)
        f_rr = self._spline.ev(rho, phi, dx=2)
        f_rp = self._spline.ev(rho, phi, dx=1, dy=1)
        f_pp = self._spline.ev(rho, phi, dy=2)
        x_rho, x_phi, u, up, r, r1 = self._chart_jacobian(rho, phi)
        r2 = g.boundary_radius_at(phi, 2)
        x_rp = r1[..., None] * u + r[..., None] * up
        x_pp = rho[..., None] * (r2[..., None] * u + 2.0 * r1[..., None] * up
                                 - r[..., None] * u)
        det = x_rho[..., 0] * x_phi[..., 1] - x_rho[..., 1] * x_phi[..., 0]
        grad_x = (f_r * x_phi[..., 1] - f_p * x_rho[..., 1]) / det
        grad_y = (-f_r * x_phi[..., 0] + f_p * x_rho[..., 0]) / det
        c_rr = f_rr
        c_rp = f_rp - grad_x * x_rp[..., 0] - grad_y * x_rp[..., 1]
        c_pp = f_pp - grad_x * x_pp[..., 0] - grad_y * x_pp[..., 1]
        # K = J^{-1}: rows chart, cols cart
        k_rx = x_phi[..., 1] / det
        k_ry = -x_phi[..., 0] / det
        k_px = -x_rho[..., 1] / det
        k_py = x_rho[..., 0] / det
        hxx = k_rx ** 2 * c_rr + 2 * k_rx * k_px * c_rp + k_px ** 2 * c_pp
        hxy = (k_rx * k_ry * c_rr + (k_rx * k_py + k_px * k_ry) * c_rp
               + k_px * k_py * c_pp)
        hyy = k_ry ** 2 * c_rr + 2 * k_ry * k_py * c_rp + k_py ** 2 * c_pp
        return np.stack([hxx, hxy, hyy], axis=-1)


# ---------------------------------------------------------------------------
# Field dump format
# ---------------------------------------------------------------------------

def write_field_csv(grid, values, path):
    """Dump a field as CSV rows (i_rho, i_phi, x1, x2, value), rho-major."""
    values = _values_of(values)
    with open(path, "w") as fh:
        fh.write("i_rho,i_phi,x1,x2,value\n")
        fh.write("0,0,%.17g,%.17g,%.17g\n"
                 % (grid.anchor[0], grid.anchor[1], values[0]))
        for i in range(1, grid.n_rho + 1):
            for j in range(grid.n_phi):
                k = 1 + (i - 1) * grid.n_phi + j
                fh.write("%d,%d,%.17g,%.17g,%.17g\n"
                         % (i, j, grid.nodes[k, 0], grid.nodes[k, 1], values[k]))


def read_field_csv(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    return data[:, :2].astype(int), data[:, 2:4], data[:, 4]
