"""Weighted capacitance matrix, complex band functions and vorticity.

The two subwavelength bands of the dimer chain are, to leading order in the
density contrast, ``omega_j = sqrt(lambda_j / |D_1|)`` where ``lambda_j`` are the
eigenvalues of ``diag(kappa_1, kappa_2) C^alpha / rho``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._winding import winding_number
from .capacitance import DEFAULT_GRID, DEFAULT_N_MULT, capacitance_sweep
from .errors import DegenerateBandError, NotFoundError

SEPARABLE_TOL = 1e-10


@dataclass(frozen=True)
class MaterialConfig:
    """Bulk moduli of the two resonators and the background medium.

    ``kappa_bg`` and ``rho_bg`` describe the surrounding medium, ``rho_b`` the
    density shared by all resonators.
    """

    kappa1: complex = 1.0
    kappa2: complex = 1.0
    kappa_bg: float = 7000.0
    rho_bg: float = 7000.0
    rho_b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kappa1", complex(self.kappa1))
        object.__setattr__(self, "kappa2", complex(self.kappa2))
        if not (self.rho_bg > 0 and self.rho_b > 0 and self.kappa_bg > 0):
            raise ValueError("densities and background bulk modulus must be positive")
        if self.kappa1 == 0 or self.kappa2 == 0:
            raise ValueError("resonator bulk moduli must be non-zero")
        if self.delta > 0.01:
            warnings.warn(f"density contrast {self.delta:.3g} is not small; leading-order theory may be poor",
                          stacklevel=2)

    @property
    def delta(self):
        return self.rho_b / self.rho_bg

    @property
    def v(self):
        """Wave speed in the background."""
        return float(np.sqrt(self.kappa_bg / self.rho_bg))

    @property
    def v_b(self):
        """Complex wave speeds inside the two resonators."""
        return np.sqrt(np.array([self.kappa1, self.kappa2]) / self.rho_b)

    @property
    def equal_real_parts(self):
        return abs(self.kappa1.real - self.kappa2.real) <= 1e-12 * max(abs(self.kappa1), abs(self.kappa2))

    def swapped(self):
        return MaterialConfig(self.kappa2, self.kappa1, self.kappa_bg, self.rho_bg, self.rho_b)

    def conjugated(self):
        return MaterialConfig(self.kappa1.conjugate(), self.kappa2.conjugate(), self.kappa_bg, self.rho_bg,
                              self.rho_b)


def alpha_grid(L, n=DEFAULT_GRID):
    """Uniform grid of ``n`` points on (-pi/L, pi/L], ending at pi/L.

    For even ``n`` the grid contains 0 and is symmetric under alpha -> -alpha
    (with -pi/L identified with pi/L).
    """
    if n < 2:
        raise ValueError("grid needs at least two points")
    return -np.pi / L + 2.0 * np.pi / L * np.arange(1, n + 1) / n


def weighted_capacitance(C, mat):
    """``diag(kappa_1, kappa_2) C / rho``; ``C`` may be a stack ``(..., 2, 2)``."""
    C = getattr(C, "C", C)
    w = np.array([mat.kappa1, mat.kappa2]) / mat.rho_bg
    return w[:, None] * np.asarray(C)


def band_eigenvalues_from_capacitance(C, mat):
    """Closed-form ``(lambda_1, lambda_2)`` from ``C^alpha`` and the moduli.

    ``lambda_j = (C11 (k1 + k2)/2 + (-1)^j sqrt(((k1 - k2)/2)^2 C11^2 + k1 k2 |C12|^2)) / rho``
    with the principal square root, so ``lambda_1`` carries the minus sign.
    """
    C = np.asarray(getattr(C, "C", C))
    k1, k2 = mat.kappa1, mat.kappa2
    c11 = C[..., 0, 0].real
    c12sq = np.abs(C[..., 0, 1]) ** 2
    root = np.sqrt(((k1 - k2) / 2.0) ** 2 * c11**2 + k1 * k2 * c12sq + 0j)
    mean = c11 * (k1 + k2) / 2.0
    return (mean - root) / mat.rho_bg, (mean + root) / mat.rho_bg


def band_eigenvalues(Cv):
    """Eigenvalues of a weighted capacitance matrix ``(..., 2, 2)`` in closed form.

    Uses ``tr/2 -+ sqrt((M11 - M22)^2/4 + M12 M21)`` with the principal root,
    which equals the moduli-and-capacitance formula whenever
    ``Cv = diag(k) C / rho`` with ``C11 = C22`` real and ``C21 = conj(C12)``.
    """
    M = np.asarray(Cv)
    half = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    root = np.sqrt(0.25 * (M[..., 0, 0] - M[..., 1, 1]) ** 2 + M[..., 0, 1] * M[..., 1, 0] + 0j)
    return half - root, half + root


def frequency_from_eigenvalue(lam, area):
    """``sqrt(lam / area)`` on the principal branch (Re >= 0, then Im >= 0)."""
    return np.sqrt(np.asarray(lam, dtype=complex) / area)


def continue_labels(values):
    """Reorder an ``(n, 2)`` array so each column varies continuously.

    Nearest-neighbour matching along the first axis.  Returns the reordered
    array, the per-row permutation, and the indices where both assignments
    were equally close (ambiguous continuation).
    """
    values = np.asarray(values)
    out = values.copy()
    perm = np.zeros(len(values), dtype=int)
    ambiguous = []
    for k in range(1, len(values)):
        prev = out[k - 1]
        keep = abs(values[k, 0] - prev[0]) + abs(values[k, 1] - prev[1])
        swap = abs(values[k, 1] - prev[0]) + abs(values[k, 0] - prev[1])
        scale = max(float(np.max(np.abs(prev))), 1e-300)
        if abs(keep - swap) <= 1e-12 * scale:
            ambiguous.append(k)
        if swap < keep:
            out[k] = values[k, ::-1]
            perm[k] = 1
    return out, perm, ambiguous


@dataclass
class BandSpectrum:
    """Band functions sampled on an alpha grid, labels continued in alpha."""

    alphas: np.ndarray
    lam: np.ndarray
    omega: np.ndarray
    C: np.ndarray = field(repr=False)
    mat: MaterialConfig = None
    area: float = np.pi
    flagged: list = field(default_factory=list)

    @property
    def gap(self):
        return self.lam[:, 1] - self.lam[:, 0]

    @property
    def separable(self):
        return bool(np.min(np.abs(self.gap)) > SEPARABLE_TOL * np.max(np.abs(self.lam)))


def band_structure(geom, mat, alphas=None, n_mult=DEFAULT_N_MULT, C=None):
    """Complex band functions on ``alphas`` (default: the standard grid).

    ``C`` may carry a precomputed capacitance stack matching ``alphas``;
    alpha = 0 uses the extrapolated zone-centre matrix.
    """
    alphas = alpha_grid(geom.period) if alphas is None else np.asarray(alphas, dtype=float)
    C = capacitance_sweep(geom, alphas, n_mult) if C is None else np.asarray(C)
    l1, l2 = band_eigenvalues_from_capacitance(C, mat)
    lam, _, flagged = continue_labels(np.column_stack([l1, l2]))
    omega = frequency_from_eigenvalue(lam, geom.area)
    return BandSpectrum(alphas, lam, omega, C, mat, geom.area, flagged)


def vorticity(spec):
    """Winding number of ``omega_2 - omega_1`` around 0 over the zone."""
    diff = spec.omega[:, 1] - spec.omega[:, 0]
    if not spec.separable:
        raise DegenerateBandError("bands touch on the sampled grid; vorticity undefined")
    return winding_number(diff, 0.0)


def reflection_asymmetry(spec):
    """max_alpha |omega_j(alpha) - omega_j(-alpha)| / |omega_j(alpha)| over shared grid points."""
    a = spec.alphas
    worst = 0.0
    for k, ak in enumerate(a):
        match = np.nonzero(np.isclose(a, -ak, rtol=0.0, atol=1e-12 * (1 + abs(ak))))[0]
        if match.size == 0:
            continue
        m = match[0]
        rel = np.abs(spec.omega[k] - spec.omega[m]) / np.abs(spec.omega[k])
        worst = max(worst, float(rel.max()))
    return worst


def _exceptional_margin(C, b):
    c11 = C[:, 0, 0].real
    c12sq = np.abs(C[:, 0, 1]) ** 2
    return float(np.max(b * b * c11**2 - (1.0 + b * b) * c12sq))


def exceptional_threshold(geom, alphas=None, n_mult=DEFAULT_N_MULT, bracket=(0.0, 10.0), tol=1e-12, C=None):
    """Smallest ``b = Im(kappa)`` where ``kappa, conj(kappa)`` with Re = 1 reach an exceptional point.

    The radicand of the band formula is ``(1 + b^2)|C12|^2 - b^2 C11^2``; the
    threshold is where its minimum over alpha first reaches zero, found by
    bisection on ``b``.
    """
    alphas = alpha_grid(geom.period) if alphas is None else np.asarray(alphas, dtype=float)
    C = capacitance_sweep(geom, alphas, n_mult) if C is None else np.asarray(C)
    lo, hi = map(float, bracket)
    f_lo, f_hi = _exceptional_margin(C, lo), _exceptional_margin(C, hi)
    if not (f_lo < 0.0 <= f_hi):
        raise NotFoundError(f"no exceptional point for Im(kappa) in [{lo}, {hi}] "
                            f"(margins {f_lo:.3e}, {f_hi:.3e})")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _exceptional_margin(C, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
