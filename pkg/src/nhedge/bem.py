"""Dense piecewise-constant boundary element reference solver.

Independent of the Fourier-harmonic discretisation in :mod:`capacitance`:
each circle is cut into equal arcs carrying a constant density, and the
single layer equation is collocated at arc midpoints.  On a disk acting on
itself the log kernel is split as ``log(R|u|) + log(|2 sin(u/2)|/|u|)`` in
the angle difference ``u``; the first piece is integrated exactly and the
second (smooth) one with Gauss-Legendre.  Cross-disk and lattice-image parts
are smooth and use Gauss-Legendre on every arc.
"""

import numpy as np

from .green import DEFAULT_PARAMS, QuasiPeriodicity, free_green_2d, qp_green, qp_green_regular

GAUSS_ORDER = 3


def _arc_quadrature(center, R, n_panels, order):
    h = 2.0 * np.pi / n_panels
    mids = h * (np.arange(n_panels) + 0.5)
    xg, wg = np.polynomial.legendre.leggauss(order)
    ang = mids[:, None] + 0.5 * h * xg[None, :]
    pts = np.stack([center[0] + R * np.cos(ang), center[1] + R * np.sin(ang)], axis=-1)
    weights = np.broadcast_to(0.5 * h * R * wg, ang.shape)
    colloc = np.column_stack([center[0] + R * np.cos(mids), center[1] + R * np.sin(mids)])
    return mids, colloc, pts, weights


def _self_log_matrix(R, n_panels, order=4):
    """(1/2pi) int_{arc t} log|x_s - y| dsigma(y) on one circle."""
    h = 2.0 * np.pi / n_panels
    mids = h * (np.arange(n_panels) + 0.5)
    u_c = mids[:, None] - mids[None, :]
    u_c = np.mod(u_c + np.pi, 2.0 * np.pi) - np.pi
    ua, ub = u_c - 0.5 * h, u_c + 0.5 * h

    def F(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u == 0.0, 0.0, u * np.log(np.abs(u)) - u)

    sing = h * np.log(R) + F(ub) - F(ua)
    xg, wg = np.polynomial.legendre.leggauss(order)
    u = u_c[..., None] + 0.5 * h * xg
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(u == 0.0, 1.0, np.abs(2.0 * np.sin(0.5 * u)) / np.abs(u))
    smooth = np.sum(np.log(ratio) * wg, axis=-1) * 0.5 * h
    return R * (sing + smooth) / (2.0 * np.pi)


def bem_operator(centers, R, n_panels, cross_kernel, self_kernel=None, order=GAUSS_ORDER):
    centers = np.asarray(centers, dtype=float)
    K = len(centers)
    quads = [_arc_quadrature(c, R, n_panels, order) for c in centers]
    A = np.zeros((K * n_panels, K * n_panels), dtype=complex)
    logself = _self_log_matrix(R, n_panels)
    for i in range(K):
        x = quads[i][1][:, None, None, :]
        rows = slice(i * n_panels, (i + 1) * n_panels)
        for k in range(K):
            cols = slice(k * n_panels, (k + 1) * n_panels)
            y = quads[k][2][None, :, :, :]
            w = quads[k][3][None, :, :]
            if k == i:
                block = logself.astype(complex)
                if self_kernel is not None:
                    block = block + np.sum(self_kernel(x, y) * w, axis=-1)
            else:
                block = np.sum(cross_kernel(x, y) * w, axis=-1)
            A[rows, cols] = block
    return A


def _unit_potential_charges(A, K, n_panels, R, neutral=False):
    size = K * n_panels
    h = 2.0 * np.pi * R / n_panels
    owner = np.repeat(np.arange(K), n_panels)
    rhs = (owner[:, None] == np.arange(K)[None, :]).astype(complex)
    if neutral:
        M = np.zeros((size + 1, size + 1), dtype=complex)
        M[:size, :size] = A
        M[:size, size] = 1.0
        M[size, :size] = h
        rhs = np.vstack([rhs, np.zeros((1, K))])
        sol = np.linalg.solve(M, rhs)[:size]
    else:
        sol = np.linalg.solve(A, rhs)
    C = np.zeros((K, K), dtype=complex)
    for i in range(K):
        C[i] = -h * sol[owner == i].sum(axis=0)
    return C


def bem_quasi_capacitance(geom, alpha, n_panels=512, params=DEFAULT_PARAMS):
    """Reference ``C^alpha`` from the piecewise-constant collocation solver."""
    qp = alpha if isinstance(alpha, QuasiPeriodicity) else QuasiPeriodicity(float(alpha), geom.period)

    def cross(x, y):
        return qp_green(x, y, qp, params)

    def self_(x, y):
        return qp_green_regular(x, y, qp, params)

    A = bem_operator(geom.centers, geom.radius, n_panels, cross, self_)
    return _unit_potential_charges(A, 2, n_panels, geom.radius)


def bem_finite_capacitance(centers, R, n_panels=512):
    """Reference free-space capacitance (neutral far-field gauge)."""

    def cross(x, y):
        return free_green_2d(x, y)

    A = bem_operator(centers, R, n_panels, cross, None)
    C = _unit_potential_charges(A, len(centers), n_panels, R, neutral=True).real
    return 0.5 * (C + C.T)
