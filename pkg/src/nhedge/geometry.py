"""Dimer-chain geometry: the periodic unit cell and truncated arrays.

Separations ``d`` (inside a dimer) and ``d'`` (between dimers) are
boundary-to-boundary gaps by default.  With ``separation="center"`` they are
read as centre-to-centre distances instead.  The cell is centred on the
dimer midpoint, so parity is exactly ``x -> -x``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError

SEPARATION_MODES = ("gap", "center")


@dataclass(frozen=True)
class ChainGeometry:
    radius: float
    gap_in: float
    gap_out: float
    separation: str = "gap"

    def __post_init__(self):
        if self.separation not in SEPARATION_MODES:
            raise InvalidGeometryError(f"separation must be one of {SEPARATION_MODES}, got {self.separation!r}")
        for name in ("radius", "gap_in", "gap_out"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidGeometryError(f"{name} must be positive, got {v}")
        if self.d <= 0 or self.d_out <= 0:
            raise InvalidGeometryError(
                f"disks overlap: boundary gaps d={self.d:g}, d'={self.d_out:g} must be positive"
            )

    @property
    def d(self):
        """Boundary gap inside the dimer."""
        return self.gap_in if self.separation == "gap" else self.gap_in - 2.0 * self.radius

    @property
    def d_out(self):
        """Boundary gap between neighbouring dimers."""
        return self.gap_out if self.separation == "gap" else self.gap_out - 2.0 * self.radius

    @property
    def period(self):
        return self.d + self.d_out + 4.0 * self.radius

    @property
    def half_spacing(self):
        """Distance from the cell centre to either resonator centre."""
        return self.radius + 0.5 * self.d

    @property
    def centers(self):
        s = self.half_spacing
        return np.array([[-s, 0.0], [s, 0.0]])

    @property
    def area(self):
        """Area |D_1| of one disk."""
        return np.pi * self.radius**2

    def swapped(self):
        """Same chain with the roles of the two gaps exchanged."""
        return ChainGeometry(self.radius, self.gap_out, self.gap_in, self.separation)


def build_periodic(R=1.0, d=0.5, d_out=6.0, separation="gap"):
    return ChainGeometry(float(R), float(d), float(d_out), separation)


@dataclass(frozen=True)
class FiniteArrayLayout:
    """Ordered resonator centres of a truncated chain.

    ``cells`` holds the unit-cell index of each resonator (material edge) or
    the signed pair index (geometric defect, 0 for the centre), and ``site``
    holds 1/2 for the left/right member of the dimer (0 for the centre).
    """

    centers: np.ndarray
    radius: float
    defect_kind: str
    cells: np.ndarray
    site: np.ndarray
    cell_count: int
    geometry: ChainGeometry = field(repr=False, default=None)

    @property
    def n(self):
        return len(self.centers)

    @property
    def area(self):
        return np.pi * self.radius**2

    def kappa_vector(self, kappa1, kappa2):
        """Bulk modulus per resonator.

        Material edge: cells ``m <= 0`` carry ``(kappa1, kappa2)`` on sites
        (1, 2) and cells ``m > 0`` carry ``(kappa2, kappa1)``.  Geometric
        defect: every dimer carries ``(kappa1, kappa2)`` left to right and the
        centre resonator carries ``Re(kappa1)``.
        """
        k1, k2 = complex(kappa1), complex(kappa2)
        out = np.empty(self.n, dtype=complex)
        if self.defect_kind == "material-edge":
            left = self.cells <= 0
            out[left & (self.site == 1)] = k1
            out[left & (self.site == 2)] = k2
            out[~left & (self.site == 1)] = k2
            out[~left & (self.site == 2)] = k1
        else:
            out[self.site == 1] = k1
            out[self.site == 2] = k2
            out[self.site == 0] = k1.real
        return out

    def min_gap(self):
        c = self.centers
        if len(c) < 2:
            return np.inf
        diff = c[:, None, :] - c[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        return float(dist.min() - 2.0 * self.radius)


def build_material_defect_array(geom, cells_per_side):
    """Chain of ``2 * cells_per_side`` dimers, cells ``m = 1-n .. n``.

    The array is centred on the edge between cells 0 and 1, so parity about
    the origin maps site 1 of cell ``m`` onto site 2 of cell ``1 - m``.
    """
    n = int(cells_per_side)
    if n < 1:
        raise InvalidGeometryError("cells_per_side must be >= 1")
    L, s = geom.period, geom.half_spacing
    cells = np.repeat(np.arange(1 - n, n + 1), 2)
    site = np.tile([1, 2], 2 * n)
    x = (cells - 0.5) * L + np.where(site == 1, -s, s)
    centers = np.column_stack([x, np.zeros_like(x)])
    return FiniteArrayLayout(centers, geom.radius, "material-edge", cells, site, 2 * n, geom)


def build_geometric_defect_array(geom, M):
    """Centre resonator flanked by ``M`` dimers on each side (N = 4M + 1).

    The centre is separated from the nearest dimer on either side by the
    outer gap, and the layout is mirror symmetric about it.
    """
    M = int(M)
    if M < 1:
        raise InvalidGeometryError("M must be >= 1")
    if geom.d >= geom.d_out:
        warnings.warn("geometric defect assumes d < d'; the centre will not be isolated", stacklevel=2)
    R = geom.radius
    dc = geom.d + 2 * R
    doc = geom.d_out + 2 * R
    P = dc + doc
    k = np.arange(1, M + 1)
    inner = doc + (k - 1) * P
    outer = inner + dc
    xs = np.concatenate([-outer[::-1], -inner[::-1], [0.0], inner, outer])
    pair = np.concatenate([-k[::-1], -k[::-1], [0], k, k])
    # left member of every dimer is site 1
    site = np.concatenate([np.ones(M, int), 2 * np.ones(M, int), [0], np.ones(M, int), 2 * np.ones(M, int)])
    order = np.argsort(xs, kind="stable")
    xs, pair, site = xs[order], pair[order], site[order]
    centers = np.column_stack([xs, np.zeros_like(xs)])
    return FiniteArrayLayout(centers, R, "geometric-center", pair, site, M, geom)
