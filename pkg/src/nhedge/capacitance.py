"""Capacitance matrices from a Fourier-harmonic (multipole) single layer solve.

On every disk the density is expanded as ``sum_{|n| <= N} c_n e^{i n theta}``
(per unit arc length).  The boundary trace of the single layer potential is
projected onto the same harmonics.  The log singularity of a disk acting on
itself is diagonal in this basis::

    (1/2pi) int log|x(t) - y(s)| e^{i n s} R ds = R log R        (n = 0)
                                                 = -R / (2|n|)    (n != 0)

Everything else (other disks, lattice images) is smooth on the circles and is
integrated with the periodic trapezoidal rule.  Since the exterior normal
derivative of a potential that is constant inside each disk equals the
density, ``C_ij = -int_{dD_i} phi_j`` where ``S[phi_j] = delta_ij`` on
``dD_i``.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, AssemblyError, SingularQuasiPeriodicityError
from .green import (
    DEFAULT_PARAMS,
    QuasiPeriodicity,
    free_green_2d,
    qp_green,
    qp_green_regular,
    reduce_alpha,
)

DEFAULT_N_MULT = 10
DEFAULT_GRID = 128
COND_WARN = 1e12


def default_nodes(n_mult):
    return max(64, 8 * n_mult)


def _circle(center, R, nq):
    t = 2.0 * np.pi * np.arange(nq) / nq
    pts = np.column_stack([center[0] + R * np.cos(t), center[1] + R * np.sin(t)])
    return t, pts


def _modes(n_mult):
    return np.arange(-n_mult, n_mult + 1)


def _self_log_diagonal(R, n_mult):
    n = _modes(n_mult)
    with np.errstate(divide="ignore"):
        diag = np.where(n == 0, R * np.log(R), -R / (2.0 * np.maximum(np.abs(n), 1)))
    return diag.astype(complex)


def assemble_operator(centers, R, n_mult, cross_kernel, self_kernel=None, nq=None):
    """Galerkin-Fourier matrix of the single layer operator on a set of disks.

    ``cross_kernel(x, y)`` is the full kernel between distinct disks and
    ``self_kernel(x, y)`` the smooth remainder on a disk after removing
    ``log|x - y|/(2 pi)`` (``None`` when nothing remains).  Returns a square
    matrix of size ``K (2N + 1)``, disk-major.
    """
    centers = np.asarray(centers, dtype=float)
    K = len(centers)
    nq = nq or default_nodes(n_mult)
    nm = 2 * n_mult + 1
    t = 2.0 * np.pi * np.arange(nq) / nq
    E = np.exp(1j * np.outer(t, _modes(n_mult)))  # (nq, nm)
    scale = 2.0 * np.pi * R / nq**2
    pts = np.stack([_circle(c, R, nq)[1] for c in centers])  # (K, nq, 2)
    A = np.zeros((K * nm, K * nm), dtype=complex)
    diag = np.diag(_self_log_diagonal(R, n_mult))
    for i in range(K):
        x = pts[i][:, None, :]
        rows = slice(i * nm, (i + 1) * nm)
        others = [k for k in range(K) if k != i]
        if others:
            y = pts[others].reshape(1, -1, 2)
            kern = np.asarray(cross_kernel(x, y)).reshape(nq, len(others), nq)
            for j, k in enumerate(others):
                A[rows, k * nm:(k + 1) * nm] = scale * (E.conj().T @ kern[:, j, :] @ E)
        block = diag.copy()
        if self_kernel is not None:
            kern = np.asarray(self_kernel(x, pts[i][None, :, :]))
            block = block + scale * (E.conj().T @ kern @ E)
        A[rows, rows] = block
    return A


def _quasi_kernels(qp, params):
    def cross(x, y):
        return qp_green(x, y, qp, params)

    def self_(x, y):
        return qp_green_regular(x, y, qp, params)

    return cross, self_


def assemble_single_layer(geom, qp, n_mult=DEFAULT_N_MULT, nq=None, params=DEFAULT_PARAMS):
    """Quasiperiodic single layer matrix on the two disks of one cell."""
    if not isinstance(qp, QuasiPeriodicity):
        qp = QuasiPeriodicity(float(qp), geom.period)
    if qp.is_singular:
        raise SingularQuasiPeriodicityError("single layer operator is singular at alpha = 0")
    if n_mult < 1:
        raise ValueError("n_mult must be >= 1")
    cross, self_ = _quasi_kernels(qp, params)
    A = assemble_operator(geom.centers, geom.radius, n_mult, cross, self_, nq)
    cond = np.linalg.cond(A)
    if cond > COND_WARN:
        warnings.warn(f"single layer matrix is ill-conditioned (cond = {cond:.2e})", stacklevel=2)
    return A


def _solve_unit_potentials(A, K, n_mult, R, neutral=False):
    """Densities for unit potential on each disk; returns capacitance and tail.

    With ``neutral=True`` every solve also carries an unknown constant and
    the total charge is constrained to vanish (bounded far field in 2D).
    """
    nm = 2 * n_mult + 1
    zero = np.arange(K) * nm + n_mult
    size = K * nm
    if neutral:
        M = np.zeros((size + 1, size + 1), dtype=A.dtype)
        M[:size, :size] = A
        M[zero, size] = 1.0
        M[size, zero] = 2.0 * np.pi * R
        rhs = np.zeros((size + 1, K), dtype=complex)
        rhs[zero, np.arange(K)] = 1.0
    else:
        M = A
        rhs = np.zeros((size, K), dtype=complex)
        rhs[zero, np.arange(K)] = 1.0
    try:
        X = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("singular single layer system", condition_number=np.inf) from exc
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e15:
        raise AssemblyError(f"single layer system is numerically singular (cond = {cond:.2e})", cond)
    X = X[:size]
    C = -2.0 * np.pi * R * X[zero, :]
    coeffs = X.reshape(K, nm, K)
    top = np.maximum(np.abs(coeffs[:, 0, :]), np.abs(coeffs[:, -1, :])).max()
    lead = np.abs(coeffs[:, n_mult, :]).max()
    tail = float(top / lead) if lead > 0 else 0.0
    return C, tail, X


@dataclass(frozen=True)
class QuasiCapacitance:
    """2x2 quasiperiodic capacitance matrix at one Bloch wavenumber.

    ``residual`` is the relative size of the highest retained harmonic, a
    cheap truncation indicator.
    """

    alpha: float
    C: np.ndarray
    n_mult: int
    residual: float

    @property
    def c11(self):
        return self.C[0, 0]

    @property
    def c12(self):
        return self.C[0, 1]

    def hermiticity_defect(self):
        return float(np.linalg.norm(self.C - self.C.conj().T) / np.linalg.norm(self.C))


@lru_cache(maxsize=4096)
def _capacitance_cached(geom, alpha, n_mult, nq, params):
    qp = QuasiPeriodicity(alpha, geom.period)
    A = assemble_single_layer(geom, qp, n_mult, nq, params)
    C, tail, _ = _solve_unit_potentials(A, 2, n_mult, geom.radius)
    C.setflags(write=False)
    return QuasiCapacitance(qp.alpha, C, n_mult, tail)


def capacitance_at(geom, alpha, n_mult=DEFAULT_N_MULT, nq=None, params=DEFAULT_PARAMS):
    """Quasiperiodic capacitance matrix ``C^alpha`` (positive definite).

    Results are memoised per (geometry, alpha, order); the returned matrix is
    read-only.
    """
    a = alpha.alpha if isinstance(alpha, QuasiPeriodicity) else reduce_alpha(float(alpha), geom.period)
    return _capacitance_cached(geom, float(a), int(n_mult), nq, params)


def capacitance_sweep(geom, alphas, n_mult=DEFAULT_N_MULT, nq=None, params=DEFAULT_PARAMS, workers=1, eps=None):
    """Stack of ``C^alpha`` over ``alphas`` (shape ``(len, 2, 2)``).

    Points with ``alpha == 0`` (mod 2 pi/L) use the value extrapolated with
    step ``eps`` (see :func:`capacitance_at_gamma_points`).  ``workers > 1``
    solves the alpha points on a thread pool; every point is an independent
    solve, so the result does not depend on ``workers``.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    qps = [QuasiPeriodicity(a, geom.period) for a in alphas]
    out = np.empty((len(alphas), 2, 2), dtype=complex)
    if any(qp.is_singular for qp in qps):
        gamma = capacitance_at_gamma_points(geom, n_mult, eps, nq, params)[0]
        for k, qp in enumerate(qps):
            if qp.is_singular:
                out[k] = gamma
    todo = [k for k, qp in enumerate(qps) if not qp.is_singular]

    def solve(k):
        return capacitance_at(geom, qps[k], n_mult, nq, params).C

    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(solve, todo))
    else:
        results = [solve(k) for k in todo]
    for k, C in zip(todo, results):
        out[k] = C
    return out


def capacitance_at_gamma_points(geom, n_mult=DEFAULT_N_MULT, eps=None, nq=None, params=DEFAULT_PARAMS):
    """Return ``(C^0, C^{pi/L})``; ``C^0`` is real, ``C^{pi/L}`` as solved.

    ``C^alpha`` has a term linear in ``|alpha|`` at the zone centre (the
    q = alpha harmonic of the kernel behaves like ``1/|alpha|``), so ``C^0`` is
    extrapolated with a polynomial in ``|alpha|`` through ``eps, 2eps, 3eps``.
    The two- and three-point estimates must agree to 1e-4 relative.
    """
    L = geom.period
    eps = 1e-3 * np.pi / L if eps is None else float(eps)
    Cs = [capacitance_at(geom, k * eps, n_mult, nq, params).C for k in (1, 2, 3)]
    c0_3 = 3.0 * Cs[0] - 3.0 * Cs[1] + Cs[2]
    c0_2 = 2.0 * Cs[0] - Cs[1]
    scale = np.abs(c0_3).max()
    disagreement = float(np.abs(c0_3 - c0_2).max() / scale)
    if disagreement > 1e-4:
        raise AccuracyError(
            f"alpha -> 0 extrapolation unstable (relative disagreement {disagreement:.2e})",
            residual=disagreement,
        )
    C0 = c0_3.real
    Cpi = capacitance_at(geom, np.pi / L, n_mult, nq, params).C
    return C0, Cpi


def finite_capacitance_matrix(centers, R, n_mult=DEFAULT_N_MULT, nq=None):
    """Free-space capacitance matrix of an array of equal disks (2D, log kernel).

    The log kernel does not decay, so each unit-potential solve carries a
    free additive constant and zero total charge: the potentials tend to a
    common constant at infinity.  The result is real symmetric positive
    semi-definite with the all-ones vector in its kernel.
    """
    centers = np.asarray(centers, dtype=float)
    K = len(centers)

    def cross(x, y):
        return free_green_2d(x, y)

    A = assemble_operator(centers, R, n_mult, cross, None, nq)
    C, _, _ = _solve_unit_potentials(A, K, n_mult, R, neutral=True)
    C = C.real
    return 0.5 * (C + C.T)


@dataclass(frozen=True)
class RealSpaceCapacitance:
    """Cell-offset coefficient ``C^m``: coupling of cell 0 to cell ``m``."""

    m: int
    C: np.ndarray


def realspace_coeffs(geom, m_max, grid_size=64, n_mult=DEFAULT_N_MULT, nq=None, params=DEFAULT_PARAMS):
    """Inverse Floquet transform ``C^m = (L/2pi) int C^alpha e^{-i alpha m L} d alpha``.

    The convention is ``C^alpha = sum_m C^m e^{i alpha m L}``, so the Laurent
    block coupling cell ``n`` to cell ``m`` is ``C^{m-n}``.  ``C^alpha`` has a
    ``|alpha|`` kink at the zone centre, so each half-zone is integrated with
    its own Gauss-Legendre rule (``grid_size / 2`` nodes each) instead of a
    uniform trapezoid rule; alpha = 0 itself is never sampled.  The
    coefficients decay like ``1/m^2``.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if grid_size < 64 or grid_size % 2:
        raise ValueError("grid_size must be even and >= 64")
    L = geom.period
    x, w = np.polynomial.legendre.leggauss(grid_size // 2)
    half = 0.5 * (x + 1.0) * np.pi / L
    alphas = np.concatenate([-half[::-1], half])
    weights = np.concatenate([w[::-1], w]) * 0.5 * np.pi / L
    Cs = np.array([capacitance_at(geom, a, n_mult, nq, params).C for a in alphas])
    scale = np.abs(Cs).max()
    out = []
    for m in range(-m_max, m_max + 1):
        Cm = L / (2.0 * np.pi) * np.einsum("k,kij->ij", weights * np.exp(-1j * alphas * m * L), Cs)
        if np.abs(Cm.imag).max() > 1e-8 * scale:
            raise AccuracyError(
                f"inverse Floquet coefficient C^{m} has imaginary part {np.abs(Cm.imag).max():.2e}",
                residual=float(np.abs(Cm.imag).max()),
            )
        out.append(RealSpaceCapacitance(m, Cm.real.copy()))
    return out


def laurent_symbol(coeffs, alpha, L):
    """Partial Fourier sum ``sum_m C^m e^{i alpha m L}`` of real-space coefficients."""
    return sum(c.C * np.exp(1j * alpha * c.m * L) for c in coeffs)
