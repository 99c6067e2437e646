"""Biorthogonal eigenvectors, phase-factor traces and non-Hermitian Zak phases.

Right eigenvectors of the weighted capacitance matrix ``M`` are fixed in the
gauge ``u_j = (e^{-i phi_j}, 1) / sqrt(2)`` with

    e^{-i phi_j} = (M11 - M22 + (-1)^j sqrt((M11 - M22)^2 + 4 M12 M21)) / (2 M21),

and left eigenvectors ``v_j`` (eigenvectors of ``M^H``) are normalised so that
``<v_i, u_j> = v_i^H u_j = delta_ij``.  Band labels follow the continuation
of :func:`nhedge.spectra.band_structure`.
"""

from dataclasses import dataclass

import numpy as np

from ._winding import winding_number
from .capacitance import DEFAULT_N_MULT, capacitance_sweep
from .errors import AccuracyError, ExceptionalPointError, GaugeUndefinedError, IllConditionedLoopError
from .spectra import alpha_grid, band_eigenvalues, continue_labels, weighted_capacitance

__all__ = [
    "BiorthogonalPair",
    "ZakResult",
    "biorthogonal_eigensystem",
    "find_winding_point",
    "phase_factor_trace",
    "total_zak",
    "winding_number",
    "zak_phase",
    "zak_phases",
]

EP_GUARD = 1e-8


@dataclass(frozen=True)
class BiorthogonalPair:
    """Right/left eigenvector pair of one band at one alpha."""

    lam: complex
    u: np.ndarray
    v: np.ndarray

    @property
    def phase_factor(self):
        """``e^{-i phi}``, the first component of ``sqrt(2) u``."""
        return complex(np.sqrt(2.0) * self.u[0])

    @property
    def phi(self):
        return complex(1j * np.log(self.phase_factor))

    @property
    def theta(self):
        """Complex phases with ``conj(v) = (e^{i theta1}, e^{i theta2}) / sqrt(2)``."""
        w = np.sqrt(2.0) * np.conj(self.v)
        return complex(-1j * np.log(w[0])), complex(-1j * np.log(w[1]))


def _phase_factors(M):
    M = np.asarray(M)
    if np.any(M[..., 1, 0] == 0):
        raise GaugeUndefinedError("off-diagonal capacitance vanishes; eigenvector gauge undefined")
    diff = M[..., 0, 0] - M[..., 1, 1]
    root = np.sqrt(diff**2 + 4.0 * M[..., 0, 1] * M[..., 1, 0] + 0j)
    den = 2.0 * M[..., 1, 0]
    return (diff - root) / den, (diff + root) / den


def biorthogonal_eigensystem(Cv):
    """Biorthogonal eigenpairs ``(band 1, band 2)`` of a 2x2 weighted capacitance matrix."""
    M = np.asarray(Cv, dtype=complex)
    l1, l2 = band_eigenvalues(M)
    if abs(l2 - l1) <= EP_GUARD * max(abs(l1), abs(l2)):
        raise ExceptionalPointError("eigenvalues coalesce; biorthogonal system undefined")
    p1, p2 = _phase_factors(M)
    U = np.array([[p1, p2], [1.0, 1.0]]) / np.sqrt(2.0)
    W = np.linalg.inv(U)
    return (BiorthogonalPair(complex(l1), U[:, 0], np.conj(W[0])),
            BiorthogonalPair(complex(l2), U[:, 1], np.conj(W[1])))


def _labelled_eigensystem(Cv):
    """Closed-form eigenpairs on a grid with band labels continued in alpha.

    Returns eigenvalues ``(n, 2)``, right vectors ``(n, 2, 2)`` (band on the
    middle axis) and left vectors of the same shape.
    """
    Cv = np.asarray(Cv)
    l1, l2 = band_eigenvalues(Cv)
    lam = np.column_stack([l1, l2])
    gap = np.abs(l2 - l1)
    if np.min(gap) <= EP_GUARD * np.max(np.abs(lam)):
        k = int(np.argmin(gap))
        raise ExceptionalPointError(f"bands nearly coalesce at grid index {k} "
                                    f"(gap {gap[k]:.2e}); Zak phase undefined")
    p1, p2 = _phase_factors(Cv)
    n = len(Cv)
    U = np.empty((n, 2, 2), dtype=complex)
    U[:, 0, 0], U[:, 0, 1] = p1, 1.0
    U[:, 1, 0], U[:, 1, 1] = p2, 1.0
    U /= np.sqrt(2.0)
    lam, perm, _ = continue_labels(lam)
    U[perm == 1] = U[perm == 1][:, ::-1]
    # rows of inv([u1 u2]) are conj(v_j)
    V = np.conj(np.linalg.inv(np.swapaxes(U, 1, 2)))
    return lam, U, V


def phase_factor_trace(geom, mat, alphas=None, j=1, n_mult=DEFAULT_N_MULT, C=None):
    """``e^{-i phi_j}`` along the alpha grid for band ``j`` (1 or 2)."""
    alphas = alpha_grid(geom.period) if alphas is None else np.asarray(alphas, dtype=float)
    C = capacitance_sweep(geom, alphas, n_mult) if C is None else np.asarray(C)
    Cv = weighted_capacitance(C, mat)
    p1, p2 = _phase_factors(Cv)
    l1, l2 = band_eigenvalues(Cv)
    _, perm, _ = continue_labels(np.column_stack([l1, l2]))
    pf = np.column_stack([p1, p2])
    pf[perm == 1] = pf[perm == 1][:, ::-1]
    return pf[:, j - 1]


@dataclass(frozen=True)
class ZakResult:
    phases: tuple
    total: float
    grid_size: int
    min_overlap: float


def _wrap(phi):
    """Map into (-pi, pi]."""
    w = -((-phi + np.pi) % (2.0 * np.pi) - np.pi)
    return float(w) + 0.0


def zak_phases(geom, mat, alphas=None, n_mult=DEFAULT_N_MULT, C=None):
    """Biorthogonal Wilson-loop Zak phases of both bands on a closed grid.

    See :func:`wilson_loop` for the discretisation.
    """
    alphas = alpha_grid(geom.period) if alphas is None else np.asarray(alphas, dtype=float)
    C = capacitance_sweep(geom, alphas, n_mult) if C is None else np.asarray(C)
    _, U, V = _labelled_eigensystem(weighted_capacitance(C, mat))
    return wilson_loop(U, V)


def wilson_loop(U, V):
    """Zak phases from right/left vectors ``(n, band, component)`` on a closed grid.

    With forward overlaps ``f_k = <v_k, u_{k+1}>`` and backward overlaps
    ``g_k = <v_{k+1}, u_k>``,

        phi = -Im( sum_k log f_k - 1/2 sum_k log(f_k g_k) ).

    The first sum is the plain biorthogonal Wilson loop; it is only first
    order accurate when ``v != u``.  The products ``f_k g_k`` are gauge
    invariant and ``1 + O(h^2)``, and subtracting half their log cancels the
    first-order error, leaving a second-order, gauge-invariant phase.
    The result is wrapped into (-pi, pi].
    """
    fwd = np.einsum("kjc,kjc->kj", np.conj(V), np.roll(U, -1, axis=0))
    bwd = np.einsum("kjc,kjc->kj", np.conj(np.roll(V, -1, axis=0)), U)
    smallest = float(min(np.min(np.abs(fwd)), np.min(np.abs(bwd))))
    if smallest < 1e-12:
        raise IllConditionedLoopError(f"overlap {smallest:.2e} between neighbouring grid points")
    raw = -(np.sum(np.log(fwd), axis=0) - 0.5 * np.sum(np.log(fwd * bwd), axis=0)).imag
    phases = tuple(_wrap(p) for p in raw)
    return ZakResult(phases, _wrap(raw.sum()), len(U), smallest)


def zak_phase(geom, mat, alphas=None, j=1, n_mult=DEFAULT_N_MULT, C=None):
    return zak_phases(geom, mat, alphas, n_mult, C).phases[j - 1]


def total_zak(geom, mat, alphas=None, n_mult=DEFAULT_N_MULT, C=None, tol=1e-2):
    """Sum of the two Zak phases; must be a multiple of pi within ``tol``."""
    res = zak_phases(geom, mat, alphas, n_mult, C)
    total = res.phases[0] + res.phases[1]
    off = abs(total / np.pi - np.rint(total / np.pi)) * np.pi
    if off > tol:
        raise AccuracyError(f"total Zak phase {total:.6f} is {off:.2e} away from a multiple of pi", residual=off)
    return total


def find_winding_point(curve, samples=64):
    """A point with nonzero winding of the closed ``curve`` about it, or ``None``.

    Searches a ``samples x samples`` grid over the bounding box, skipping
    points too close to the curve for a reliable count.  Returns
    ``(point, winding)``.
    """
    z = np.asarray(curve, dtype=complex)
    re = np.linspace(z.real.min(), z.real.max(), samples + 2)[1:-1]
    im = np.linspace(z.imag.min(), z.imag.max(), samples + 2)[1:-1]
    step = float(np.max(np.abs(np.diff(np.append(z, z[0])))))
    for y in im:
        for x in re:
            p = complex(x, y)
            if np.min(np.abs(z - p)) <= step:
                continue
            w = winding_number(z, p)
            if w != 0:
                return p, w
    return None
