"""Finite-array eigenmodes used to check the edge-mode predictions.

For ``N`` disks the leading-order resonances solve
``diag(kappa) C_N u / rho = omega^2 |D_1| u`` with ``C_N`` the free-space
capacitance matrix of the array (see
:func:`nhedge.capacitance.finite_capacitance_matrix` for the 2D gauge).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .capacitance import DEFAULT_N_MULT, finite_capacitance_matrix, realspace_coeffs
from .errors import AccuracyError, InvalidGeometryError, NotFoundError
from .geometry import build_geometric_defect_array
from .spectra import frequency_from_eigenvalue

LOCALIZATION_THRESHOLD = 0.25


@dataclass
class FiniteModeSet:
    """All eigenpairs of a finite array, sorted by (Re omega, Im omega).

    Eigenvectors are columns of ``vectors`` with unit 2-norm.
    """

    layout: object
    C: np.ndarray = field(repr=False)
    kappa: np.ndarray
    rho: float
    eigenvalues: np.ndarray
    omega: np.ndarray
    vectors: np.ndarray = field(repr=False)
    scores: np.ndarray

    @property
    def n(self):
        return len(self.omega)

    def operator(self):
        return self.kappa[:, None] * self.C / self.rho

    def residuals(self):
        M = self.operator()
        r = M @ self.vectors - self.vectors * self.eigenvalues
        return np.linalg.norm(r, axis=0) / np.linalg.norm(M, 2)

    def plot_vector(self, index):
        """Mode ``index`` scaled so that ``max |u| = 1`` with a real largest entry."""
        u = self.vectors[:, index]
        k = int(np.argmax(np.abs(u)))
        return u / u[k]


def participation_ratio(u):
    """``(sum |u|^2)^2 / (N sum |u|^4)``: about 1 for extended, 1/N for a single site."""
    p = np.abs(np.asarray(u)) ** 2
    return float(p.sum() ** 2 / (len(p) * np.sum(p * p)))


def finite_capacitance(layout, n_mult=DEFAULT_N_MULT):
    if layout.min_gap() <= 0:
        raise InvalidGeometryError(f"disks overlap (smallest gap {layout.min_gap():.3g})")
    return finite_capacitance_matrix(layout.centers, layout.radius, n_mult)


def finite_spectrum(layout, kappa, rho=7000.0, n_mult=DEFAULT_N_MULT, C=None):
    """Eigenpairs of ``diag(kappa) C_N / rho`` with ``omega = sqrt(eig / |D_1|)``.

    ``kappa`` is the per-resonator vector of bulk moduli.
    """
    kappa = np.asarray(kappa, dtype=complex)
    C = finite_capacitance(layout, n_mult) if C is None else np.asarray(C)
    if kappa.shape != (len(C),):
        raise ValueError(f"need {len(C)} bulk moduli, got shape {kappa.shape}")
    M = kappa[:, None] * C / rho
    try:
        lam, vec = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise AccuracyError(f"eigen-solver failed (cond = {np.linalg.cond(M):.2e})") from exc
    omega = frequency_from_eigenvalue(lam, layout.area)
    order = np.lexsort((np.round(omega.imag, 14), np.round(omega.real, 14)))
    lam, omega, vec = lam[order], omega[order], vec[:, order]
    vec = vec / np.linalg.norm(vec, axis=0)
    scores = np.array([participation_ratio(vec[:, k]) for k in range(len(lam))])
    return FiniteModeSet(layout, C, kappa, rho, lam, omega, vec, scores)


def localized_modes(modes, threshold=LOCALIZATION_THRESHOLD):
    """Indices of all modes whose participation ratio is below ``threshold``."""
    return [int(k) for k in np.nonzero(modes.scores < threshold)[0]]


def detect_localized_mode(modes, threshold=LOCALIZATION_THRESHOLD):
    """``(index, score)`` of the most localized mode, or ``None`` if none is below ``threshold``."""
    k = int(np.argmin(modes.scores))
    if modes.scores[k] >= threshold:
        return None
    return k, float(modes.scores[k])


@dataclass(frozen=True)
class DecayFit:
    """Decay of a localized mode.

    ``b`` is the fitted complex outer/inner amplitude ratio within a dimer
    and ``b_abs`` its modulus; ``residual`` is the relative RMS misfit of
    that ratio.  ``cell_decay`` is the per-cell factor from a log-linear fit
    of per-dimer amplitude sums and ``cell_residual`` its log RMS misfit.
    """

    b_abs: float
    residual: float
    index: int
    e_omega: float = None
    b: complex = None
    cell_decay: float = None
    cell_residual: float = None
    profile: np.ndarray = field(default=None, repr=False)


def _fit_log_slope(dist, amp):
    A = np.column_stack([dist, np.ones_like(dist)])
    y = np.log(amp)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(np.exp(coef[0])), resid


def _dimers(layout):
    """``(dist, inner, outer)`` resonator indices for every dimer off the defect.

    ``dist`` counts dimers from the defect (0 for the nearest), ``inner`` is
    the resonator closer to the array centre.
    """
    x = np.asarray(layout.centers)[:, 0]
    mid = 0.5 * (x.min() + x.max())
    cells = np.asarray(layout.cells)
    if layout.defect_kind == "material-edge":
        ids = np.unique(cells)
        dist = np.where(ids <= 0, -ids, ids - 1)
    else:
        ids = np.unique(cells[cells != 0])
        dist = np.abs(ids) - 1
    inner, outer = [], []
    for m in ids:
        pair = np.nonzero(cells == m)[0]
        far = np.abs(x[pair] - mid)
        inner.append(pair[np.argmin(far)])
        outer.append(pair[np.argmax(far)])
    return dist.astype(float), np.array(inner), np.array(outer)


def fit_decay(modes, index, predicted_omega=None, cells=None, floor=1e-12):
    """Decay constant of mode ``index``.

    At a material edge the mode decays by the factor ``b`` from the inner
    to the outer resonator of every dimer, so ``b`` is fitted by complex
    least squares of ``u_outer = b u_inner`` over the dimers on both sides.
    The per-cell factor of the per-dimer sums ``|u_1| + |u_2|`` is fitted
    log-linearly as a second measure; it is the reported ``b_abs`` for
    other layouts, where no constant intra-dimer ratio exists.  ``cells``
    limits both fits to that many dimers per side (default: all); dimers
    whose amplitude is below ``floor`` times the maximum are ignored.
    ``e_omega`` is the relative frequency discrepancy against
    ``predicted_omega`` when given.
    """
    u = modes.vectors[:, index]
    dist, inner, outer = _dimers(modes.layout)
    amp = np.abs(u[inner]) + np.abs(u[outer])
    keep = amp > floor * amp.max()
    if cells is not None:
        keep &= dist < cells
    if len(np.unique(dist[keep])) < 4:
        raise NotFoundError("need at least four cells per side for a decay fit")
    cell, cell_resid = _fit_log_slope(dist[keep], amp[keep])
    if modes.layout.defect_kind == "material-edge":
        a, c = u[inner][keep], u[outer][keep]
        b = complex(np.vdot(a, c) / np.vdot(a, a))
        resid = float(np.linalg.norm(c - b * a) / np.linalg.norm(c))
        poor = resid > 0.1
    else:
        b, resid = None, cell_resid
        poor = cell_resid > 0.5
    if poor:
        warnings.warn(f"poor decay fit (residual {resid:.2f})", stacklevel=2)
    e = None
    if predicted_omega is not None:
        e = float(abs(modes.omega[index] - predicted_omega) / abs(predicted_omega))
    b_abs = cell if b is None else abs(b)
    return DecayFit(b_abs, resid, int(index), e, b, cell, cell_resid, np.column_stack([dist, amp]))


def material_edge_kappa(cells, kappa1, kappa2):
    """Per-resonator moduli for cell indices ``cells`` (two sites each): swap across m = 0/1."""
    cells = np.asarray(cells)
    left = cells <= 0
    out = np.empty(2 * len(cells), dtype=complex)
    out[0::2] = np.where(left, kappa1, kappa2)
    out[1::2] = np.where(left, kappa2, kappa1)
    return out


def laurent_section(coeffs, cells, kappa1, kappa2):
    """Finite section of the block-Laurent capacitance and its moduli.

    ``coeffs`` are :class:`RealSpaceCapacitance` items; cells run over
    ``1 - cells .. cells`` and the block coupling cell ``n`` to cell ``m``
    is ``C^{m-n}`` (zero beyond the supplied offsets).
    """
    by_m = {c.m: c.C for c in coeffs}
    idx = np.arange(1 - cells, cells + 1)
    n = len(idx)
    big = np.zeros((2 * n, 2 * n))
    for r, nr in enumerate(idx):
        for c, mc in enumerate(idx):
            blk = by_m.get(int(mc - nr))
            if blk is not None:
                big[2 * r:2 * r + 2, 2 * c:2 * c + 2] = blk
    return idx, big, material_edge_kappa(idx, kappa1, kappa2)


def laurent_truncation_check(geom, mat, m_max=16, cells=24, b0=None, n_mult=DEFAULT_N_MULT, coeffs=None,
                             grid_size=64, threshold=LOCALIZATION_THRESHOLD, floor=1e-10):
    """Intra-cell ratio spread of the localized eigenvector of a Laurent section.

    Returns ``(defect, b_est)`` where ``b_est`` is the intra-cell ratio
    ``u_1/u_2`` of the edge cell ``n = 0`` and ``defect`` is
    ``max_{n <= 0} |u_1^n / u_2^n - b0|`` (``b0`` defaults to ``b_est``),
    taken over the cells where ``|u_2^n|`` exceeds ``floor`` times the
    largest entry.
    """
    coeffs = realspace_coeffs(geom, m_max, grid_size, n_mult) if coeffs is None else coeffs
    coeffs = [c for c in coeffs if abs(c.m) <= m_max]
    idx, big, kap = laurent_section(coeffs, cells, mat.kappa1, mat.kappa2)
    M = kap[:, None] * big / mat.rho_bg
    lam, vec = np.linalg.eig(M)
    scores = np.array([participation_ratio(vec[:, k]) for k in range(len(lam))])
    k = int(np.argmin(scores))
    if scores[k] >= threshold:
        raise NotFoundError("no localized eigenvector in the Laurent section")
    u = vec[:, k]
    u1, u2 = u[0::2], u[1::2]
    left = idx <= 0
    edge = int(np.nonzero(idx == 0)[0][0])
    b_est = complex(u1[edge] / u2[edge])
    ref = b_est if b0 is None else complex(b0)
    big_enough = np.abs(u2) > floor * np.abs(u).max()
    sel = left & big_enough
    ratios = u1[sel] / u2[sel]
    return float(np.max(np.abs(ratios - ref))), b_est


def geometric_defect_spectrum(geom, kappa1, kappa2, M=12, rho=7000.0, n_mult=DEFAULT_N_MULT,
                              threshold=LOCALIZATION_THRESHOLD, fit_cells=6):
    """Eigenmodes of the mirror-symmetric array with a centre resonator.

    Returns ``(modes, index, fit)`` for the most localized mode, or raises
    :class:`NotFoundError` if no mode is localized.  The decay fit uses the
    ``fit_cells`` dimers nearest the centre on each side, before the
    amplitude reaches the long-range floor of the 2D coupling.
    """
    layout = build_geometric_defect_array(geom, M)
    modes = finite_spectrum(layout, layout.kappa_vector(kappa1, kappa2), rho, n_mult)
    found = detect_localized_mode(modes, threshold)
    if found is None:
        raise NotFoundError("no localized mode in the geometric-defect array")
    k, _ = found
    return modes, k, fit_decay(modes, k, cells=fit_cells)
