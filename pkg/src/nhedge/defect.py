"""Edge-mode predictions for a chain whose two halves swap the bulk moduli.

Cells ``m <= 0`` carry ``(kappa_1, kappa_2)`` and cells ``m > 0`` carry
``(kappa_2, kappa_1)``.  A localized mode decays by the factor ``b`` from the
inner to the outer resonator of each dimer, and its amplitudes reduce to a 2x2 problem ``B^{-1} C^alpha A v = mu v`` with

    A = [[1, b], [b, 1]],    B = rho [[1/k2, b/k1], [b/k1, 1/k2]].

A simple localized mode needs ``mu`` independent of alpha; matching the zone
centre and the zone edge gives two candidate values of ``b``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._winding import winding_number
from .capacitance import DEFAULT_N_MULT, capacitance_at_gamma_points, capacitance_sweep
from .errors import (
    AccuracyError,
    InconsistentRootsError,
    NoFlatBandError,
    SingularMatrixError,
    SingularWindingError,
)
from .green import DEFAULT_PARAMS
from .spectra import alpha_grid, frequency_from_eigenvalue

FLATNESS_TOL = 1e-3


class PTClass(str, Enum):
    UNBROKEN = "UnbrokenPT"
    BROKEN = "BrokenPT"
    NONE = "NoPT"


@dataclass(frozen=True)
class EdgeParameters:
    """``lambda_1 = C11 + C12`` at alpha = pi/L, ``lambda_2 = 2 C11`` at alpha = 0."""

    lam1: float
    lam2: float

    @property
    def l(self):
        return (self.lam2 + self.lam1) / (self.lam2 - self.lam1)


def edge_parameters(geom, n_mult=DEFAULT_N_MULT, eps=None, params=DEFAULT_PARAMS):
    C0, Cpi = capacitance_at_gamma_points(geom, n_mult, eps, params=params)
    lam1 = float((Cpi[0, 0] + Cpi[0, 1]).real)
    lam2 = float(2.0 * C0[0, 0])
    if not 0.0 < lam1 < lam2:
        raise AccuracyError(f"edge eigenvalues violate 0 < lambda_1 < lambda_2 ({lam1:.6g}, {lam2:.6g})")
    return EdgeParameters(lam1, lam2)


def decay_roots(kappa1, kappa2, l):
    """Both roots ``(b_+, b_-)`` of ``b^2 - l (1 - r) b - r = 0`` with ``r = k1/k2``.

    The larger-magnitude root is formed directly and the other from the
    product ``b_+ b_- = -r``, which avoids cancellation.
    """
    r = complex(kappa1) / complex(kappa2)
    s = l * (1.0 - r)
    root = np.sqrt(s * s + 4.0 * r + 0j)
    plus, minus = 0.5 * (s + root), 0.5 * (s - root)
    if abs(plus) >= abs(minus):
        minus = -r / plus if plus != 0 else minus
    else:
        plus = -r / minus
    return complex(plus), complex(minus)


def _is_conjugate_pair(kappa1, kappa2, tol=1e-12):
    k1, k2 = complex(kappa1), complex(kappa2)
    return abs(k1 - k2.conjugate()) <= tol * max(abs(k1), abs(k2))


def classify_pt(kappa1, kappa2, l):
    """Unbroken, broken or absent PT symmetry of the edge problem."""
    if not _is_conjugate_pair(kappa1, kappa2):
        return PTClass.NONE
    k = complex(kappa1)
    bound = k.real / np.sqrt(l * l - 1.0)
    # equality counts as unbroken; allow round-off at the boundary
    if abs(k.imag) <= bound * (1.0 + 1e-12):
        return PTClass.UNBROKEN
    return PTClass.BROKEN


def select_decaying_root(b_plus, b_minus):
    """The root strictly inside the unit disk, or ``None`` when both have modulus >= 1."""
    inside = [b for b in (b_plus, b_minus) if abs(b) < 1.0 - 1e-12]
    if len(inside) == 2:
        raise InconsistentRootsError(f"both decay roots inside the unit disk: {b_plus}, {b_minus}")
    return inside[0] if inside else None


def defect_matrices(C, kappa1, kappa2, rho, b):
    """``(A, B, B^{-1} C A)`` of the reduced edge eigenproblem."""
    C = np.asarray(getattr(C, "C", C))
    k1, k2 = complex(kappa1), complex(kappa2)
    A = np.array([[1.0, b], [b, 1.0]], dtype=complex)
    B = rho * np.array([[1.0 / k2, b / k1], [b / k1, 1.0 / k2]], dtype=complex)
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    if abs(det) < 1e-14 * np.linalg.norm(B) ** 2:
        raise SingularMatrixError(f"B is singular (det = {abs(det):.2e})")
    return A, B, np.linalg.solve(B, C @ A)


def _mu_parts(C, kappa1, kappa2, rho, b):
    """Prefactor, linear part and radicand ``f`` of the closed-form eigenvalues."""
    C = np.asarray(C)
    k1, k2 = complex(kappa1), complex(kappa2)
    c11 = C[..., 0, 0].real
    c12 = C[..., 0, 1]
    pref = k1 * k2 / (rho * (b * b * k2 * k2 - k1 * k1))
    p = c11 * (b * b * k2 - k1) + b * (k2 - k1) * c12.real
    f = p * p - (b * b - 1.0) * (b * b * k2 * k2 - k1 * k1) * (c11**2 - np.abs(c12) ** 2)
    return pref, p, f


def mu_closed_form(C, kappa1, kappa2, rho, b):
    """Closed-form eigenvalues ``(mu_1, mu_2)`` of ``B^{-1} C A`` (principal root, mu_1 with minus)."""
    pref, p, f = _mu_parts(C, kappa1, kappa2, rho, b)
    s = np.sqrt(f + 0j)
    return pref * (p - s), pref * (p + s)


def mu_pm(C, kappa1, kappa2, rho, b):
    """``mu_+`` and ``mu_-`` valid where ``C12`` is real (alpha = 0 or pi/L)."""
    C = np.asarray(C)
    k1, k2 = complex(kappa1), complex(kappa2)
    c11, c12 = C[..., 0, 0].real, C[..., 0, 1].real
    plus = k1 * k2 * (b + 1.0) / (rho * (b * k2 + k1)) * (c11 + c12)
    minus = k1 * k2 * (b - 1.0) / (rho * (b * k2 - k1)) * (c11 - c12)
    return plus, minus


def branch_curves_fg(C, kappa1, kappa2, b):
    """Radicand ``f`` and the square ``g`` that agrees with it where ``C12`` is real."""
    C = np.asarray(C)
    k1, k2 = complex(kappa1), complex(kappa2)
    c11 = C[..., 0, 0].real
    c12 = C[..., 0, 1]
    _, _, f = _mu_parts(C, k1, k2, 1.0, b)
    g = (c12 * (b * b * k2 - k1) + c11 * b * (k2 - k1)) ** 2
    return f, g


@dataclass
class BranchCurves:
    """``f`` and ``g`` on the half zone [0, pi/L] and the closed curve they form.

    ``gamma`` runs along ``f`` from alpha = 0 to pi/L and back along ``g``.
    """

    alphas: np.ndarray
    f: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    winding: int


@dataclass
class FlatBand:
    mu: complex
    flatness: float
    other_flatness: float
    branch: int
    mu_branches: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    curves: BranchCurves = None
    swap: bool = False


def _continued_root(f, start):
    """Square root of ``f`` continued along the sample order from index ``start``."""
    n = len(f)
    s = np.sqrt(f + 0j)
    out = np.empty(n, dtype=complex)
    out[start] = s[start]
    order = [(start - k) % n for k in range(1, n)]
    prev = out[start]
    for k in order:
        cand = s[k] if abs(s[k] - prev) <= abs(s[k] + prev) else -s[k]
        out[k] = cand
        prev = cand
    return out


def _branch_curves(alphas, C, kappa1, kappa2, b):
    L_half = alphas >= -1e-14
    a = alphas[L_half]
    order = np.argsort(a)
    a = a[order]
    f, g = branch_curves_fg(C[L_half][order], kappa1, kappa2, b)
    gamma = np.concatenate([f, g[::-1][1:-1]])
    try:
        w = winding_number(gamma, 0.0)
    except SingularWindingError:
        w = 0
    return BranchCurves(a, f, g, gamma, w)


def mu_flat_band(geom, mat, b0, alphas=None, n_mult=DEFAULT_N_MULT, C=None, threshold=FLATNESS_TOL):
    """Find the alpha-independent eigenvalue of ``B^{-1} C^alpha A`` at ``b = b0``.

    The square root in the closed form is continued along the grid starting
    from alpha = pi/L (the last grid point).  The branch with the smallest
    relative spread ``max|mu - mean| / |mean|`` is the flat candidate.
    A localized mode needs ``|b0| < 1``; ``b0 = None`` (no decaying root, as
    in unbroken PT symmetry) or ``|b0| >= 1`` raises :class:`NoFlatBandError`.
    """
    if b0 is None or abs(b0) >= 1.0:
        raise NoFlatBandError("no decaying root b; no localized-mode flat band"
                              + ("" if b0 is None else f" (|b| = {abs(b0):.6f})"))
    alphas = alpha_grid(geom.period) if alphas is None else np.asarray(alphas, dtype=float)
    C = capacitance_sweep(geom, alphas, n_mult) if C is None else np.asarray(C)
    pref, p, f = _mu_parts(C, mat.kappa1, mat.kappa2, mat.rho_bg, b0)
    start = int(np.argmax(alphas))
    s = _continued_root(f, start)
    branches = np.column_stack([pref * (p - s), pref * (p + s)])
    means = branches.mean(axis=0)
    spread = np.max(np.abs(branches - means), axis=0) / np.abs(means)
    j = int(np.argmin(spread))
    curves = _branch_curves(alphas, C, mat.kappa1, mat.kappa2, b0)
    # does the flat branch meet mu_- at alpha = 0 and mu_+ at pi/L?
    swap = False
    zero = np.nonzero(np.abs(alphas) < 1e-14)[0]
    if zero.size:
        plus0, minus0 = mu_pm(C[zero[0]], mat.kappa1, mat.kappa2, mat.rho_bg, b0)
        pluspi, minuspi = mu_pm(C[start], mat.kappa1, mat.kappa2, mat.rho_bg, b0)
        at0 = branches[zero[0], j]
        atpi = branches[start, j]
        swap = bool(abs(at0 - minus0) < abs(at0 - plus0) and abs(atpi - pluspi) < abs(atpi - minuspi))
    if spread[j] > threshold:
        raise NoFlatBandError(f"no eigenvalue branch is flat in alpha (relative spreads "
                              f"{spread[0]:.2e}, {spread[1]:.2e}; threshold {threshold:.1e})")
    return FlatBand(complex(means[j]), float(spread[j]), float(spread[1 - j]), j + 1, branches, alphas,
                    curves, swap)


def defect_frequency(mu, area):
    """``sqrt(mu / |D_1|)`` on the principal branch."""
    return complex(frequency_from_eigenvalue(mu, area))


def quasi_defect_eigenproblem_residual(geom, mat, b, mu, alphas=None, n_mult=DEFAULT_N_MULT, C=None):
    """max over alpha of the smallest singular value of ``B^{-1} C A - mu I``, relative.

    Normalised by ``max(||B^{-1} C A||_2, |mu|)`` at each alpha.
    """
    alphas = alpha_grid(geom.period) if alphas is None else np.asarray(alphas, dtype=float)
    C = capacitance_sweep(geom, alphas, n_mult) if C is None else np.asarray(C)
    worst = 0.0
    for Ck in C:
        _, _, M = defect_matrices(Ck, mat.kappa1, mat.kappa2, mat.rho_bg, b)
        sv = np.linalg.svd(M - mu * np.eye(2), compute_uv=False)
        worst = max(worst, float(sv[-1] / max(np.linalg.norm(M, 2), abs(mu))))
    return worst


@dataclass
class DefectPrediction:
    b_plus: complex
    b_minus: complex
    b0: complex
    pt_class: PTClass
    edge: EdgeParameters
    mu: complex = None
    flatness: float = None
    omega: complex = None
    flat: FlatBand = field(default=None, repr=False)


def predict_defect(geom, mat, alphas=None, n_mult=DEFAULT_N_MULT, C=None, threshold=FLATNESS_TOL, eps=None,
                   params=DEFAULT_PARAMS):
    """Full edge-mode prediction.

    Raises :class:`NoFlatBandError` when no root decays (unbroken PT) or
    when the decaying root gives no flat eigenvalue branch.
    """
    edge = edge_parameters(geom, n_mult, eps, params)
    bp, bm = decay_roots(mat.kappa1, mat.kappa2, edge.l)
    pt = classify_pt(mat.kappa1, mat.kappa2, edge.l)
    b0 = select_decaying_root(bp, bm)
    if b0 is None:
        raise NoFlatBandError(f"no decaying root (|b+| = {abs(bp):.6f}, |b-| = {abs(bm):.6f}, {pt.value})")
    flat = mu_flat_band(geom, mat, b0, alphas, n_mult, C, threshold)
    return DefectPrediction(bp, bm, b0, pt, edge, flat.mu, flat.flatness, defect_frequency(flat.mu, geom.area),
                            flat)


__all__ = [
    "BranchCurves",
    "DefectPrediction",
    "EdgeParameters",
    "FlatBand",
    "PTClass",
    "branch_curves_fg",
    "classify_pt",
    "decay_roots",
    "defect_frequency",
    "defect_matrices",
    "edge_parameters",
    "mu_closed_form",
    "mu_flat_band",
    "mu_pm",
    "predict_defect",
    "quasi_defect_eigenproblem_residual",
    "select_decaying_root",
]
