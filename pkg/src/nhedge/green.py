"""Quasi-static Green's functions in two dimensions.

The free-space kernel is ``log|x - y| / (2 pi)`` (so that its Laplacian is the
Dirac delta).  The alpha-quasiperiodic kernel for a lattice of period ``L``
along ``e1`` is defined by its spectral series

    G(x, y) = -1/(2L) * sum_q exp(i q X) exp(-|q| |Y|) / |q|,
    q in alpha + (2 pi / L) Z,   (X, Y) = x - y,

valid for alpha != 0.  It satisfies ``G(x + L e1, y) = exp(i alpha L) G(x, y)``.
The series converges only algebraically on the lattice axis (Y = 0), so the
default evaluation uses an Ewald split of the Gaussian integral representation
``exp(-|q||Y|)/|q| = 2/sqrt(pi) int_0^inf exp(-q^2 t^2 - Y^2/(4 t^2)) dt``.
Short times are Poisson-resummed into exponential-integral image terms, long
times stay spectral with complementary error functions.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx, exp1

from .errors import AccuracyError, SingularEvaluationError, SingularQuasiPeriodicityError

EULER_GAMMA = 0.5772156649015329


def reduce_alpha(alpha, L):
    """Map ``alpha`` into the Brillouin zone (-pi/L, pi/L]."""
    period = 2.0 * np.pi / L
    a = np.mod(np.asarray(alpha, dtype=float) + np.pi / L, period) - np.pi / L
    # np.mod puts the upper edge at -pi/L; move it to +pi/L
    a = np.where(np.isclose(a, -np.pi / L, rtol=0.0, atol=1e-14 * period), np.pi / L, a)
    return float(a) if np.ndim(a) == 0 else a


@dataclass(frozen=True)
class QuasiPeriodicity:
    """Bloch wavenumber ``alpha`` (reduced into the zone) for period ``L``."""

    alpha: float
    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"period must be positive, got {self.L}")
        object.__setattr__(self, "alpha", reduce_alpha(self.alpha, self.L))

    @property
    def is_singular(self):
        return abs(self.alpha) < 1e-14 / self.L

    @property
    def phase(self):
        """Bloch factor exp(i alpha L) picked up over one period."""
        return np.exp(1j * self.alpha * self.L)


@dataclass(frozen=True)
class GreenParams:
    """Evaluation controls for the quasiperiodic kernel.

    ``q_cutoff`` fixes the number of reciprocal terms on each side of zero;
    ``None`` chooses it from ``target_tol``.  ``eta`` is the Ewald split
    (inverse length); ``None`` means ``sqrt(pi)/L``.
    """

    q_cutoff: int = None
    eta: float = None
    target_tol: float = 1e-10

    def __post_init__(self):
        if self.q_cutoff is not None and self.q_cutoff < 1:
            raise ValueError("q_cutoff must be >= 1")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.target_tol > 0:
            raise ValueError("target_tol must be positive")


DEFAULT_PARAMS = GreenParams()


def _split(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    return d[..., 0], d[..., 1]


def free_green_2d(x, y):
    """``log|x - y| / (2 pi)``; broadcasts over leading dimensions."""
    X, Y = _split(x, y)
    r = np.hypot(X, Y)
    if np.any(r == 0.0):
        raise SingularEvaluationError("free Green's function evaluated at coincident points")
    out = np.log(r) / (2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def free_green_gradient(x, y):
    """Gradient in ``x`` of :func:`free_green_2d`, shape ``(..., 2)``."""
    X, Y = _split(x, y)
    r2 = X * X + Y * Y
    if np.any(r2 == 0.0):
        raise SingularEvaluationError("free Green's function evaluated at coincident points")
    return np.stack([X / r2, Y / r2], axis=-1) / (2.0 * np.pi)


def _ein(z):
    """Entire exponential integral Ein(z) = E1(z) + gamma + log z, z >= 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 2.0
    zs = z[small]
    # alternating series; 40 terms reach machine precision for z < 2
    term = np.ones_like(zs)
    acc = np.zeros_like(zs)
    for k in range(1, 41):
        term = term * (-zs) / k
        acc -= term / k
    out[small] = acc
    zl = z[~small]
    out[~small] = exp1(zl) + EULER_GAMMA + np.log(zl)
    return out


def _check_alpha(qp):
    if qp.is_singular:
        raise SingularQuasiPeriodicityError(
            "quasi-static quasiperiodic Green's function is undefined at alpha = 0; "
            "use the extrapolated gamma-point capacitance instead"
        )


def _eta(qp, params):
    return params.eta if params.eta is not None else np.sqrt(np.pi) / qp.L


def _image_range(X, qp, eta, tol):
    # E1(z) < exp(-z)/z, so z > log(1/tol) is enough
    reach = np.sqrt(np.log(1.0 / tol) + 3.0) / eta
    xmax = float(np.max(np.abs(X))) if np.size(X) else 0.0
    return int(np.ceil((xmax + reach) / qp.L))


def _spectral_range(Y, qp, eta, params):
    if params.q_cutoff is not None:
        return params.q_cutoff
    ymax = float(np.max(np.abs(Y))) if np.size(Y) else 0.0
    # need |q|/(2 eta) - eta |Y| beyond sqrt(log(1/tol)) for both erfc terms
    qmax = 2.0 * eta * (np.sqrt(np.log(1.0 / params.target_tol) + 3.0) + eta * ymax)
    return int(np.ceil(qmax * qp.L / (2.0 * np.pi))) + 1


def _spectral_profile(q, Y, eta):
    """Return h(q, Y) = e^{|q||Y|} erfc(a + b) + e^{-|q||Y|} erfc(a - b) and dh/dY.

    a = |q|/(2 eta), b = eta |Y|; written with erfcx to avoid overflow.
    """
    aq = np.abs(q)
    aY = np.abs(Y)
    a = aq / (2.0 * eta)
    b = eta * aY
    gauss = np.exp(-a * a - b * b)
    plus = erfcx(a + b) * gauss
    amb = a - b
    minus = np.where(
        amb >= 0.0,
        erfcx(np.maximum(amb, 0.0)) * gauss,
        np.exp(-aq * aY) * erfc(np.minimum(amb, 0.0)),
    )
    h = plus + minus
    dh = aq * np.sign(Y) * (plus - minus)
    return h, dh


def _ewald(X, Y, qp, params, want_grad, drop_center=False):
    eta = _eta(qp, params)
    tol = params.target_tol
    L, alpha = qp.L, qp.alpha
    X, Y = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
    shape = X.shape

    # real-space images; phases are scalars, so accumulate real and imaginary parts
    mmax = _image_range(X, qp, eta, tol)
    re = np.zeros(shape)
    im = np.zeros(shape)
    if want_grad:
        gxr, gxi, gyr, gyi = (np.zeros(shape) for _ in range(4))
    Y2 = Y * Y
    for m in range(-mmax, mmax + 1):
        Xm = X - m * L
        r2 = Xm * Xm + Y2
        z = eta * eta * r2
        ph = np.exp(1j * alpha * m * L)
        if m == 0 and drop_center:
            # smooth remainder of the centre image after removing log r / (2 pi)
            re += (EULER_GAMMA - _ein(z) + 2.0 * np.log(eta)) / (4.0 * np.pi)
            if want_grad:
                # d/dx of -Ein(eta^2 r^2)/(4 pi) = -(1 - e^{-z}) x / (2 pi r^2)
                safe = np.where(r2 > 0, r2, 1.0)
                fac = np.where(z > 1e-8, -np.expm1(-z) / safe, eta * eta * (1.0 - z / 2.0))
                gxr -= fac * Xm / (2.0 * np.pi)
                gyr -= fac * Y / (2.0 * np.pi)
            continue
        if np.any(z > 700.0) and np.all(z > 700.0):
            continue
        if np.any(r2 == 0.0):
            raise SingularEvaluationError("quasiperiodic kernel evaluated at a lattice translate of the source")
        e = exp1(z) / (4.0 * np.pi)
        re -= ph.real * e
        im -= ph.imag * e
        if want_grad:
            fac = np.exp(-z) / (2.0 * np.pi * r2)
            fx, fy = fac * Xm, fac * Y
            gxr += ph.real * fx
            gxi += ph.imag * fx
            gyr += ph.real * fy
            gyi += ph.imag * fy
    val = re + 1j * im
    if want_grad:
        gx = gxr + 1j * gxi
        gy = gyr + 1j * gyi

    # reciprocal part; exp(i q_n X) by recurrence in n
    nmax = _spectral_range(Y, qp, eta, params)
    base = np.exp(1j * alpha * X)
    step = np.exp(2j * np.pi * X / L)
    last = 0.0
    for direction in (1, -1):
        ex = base.copy() if direction == 1 else base * step.conj()
        mult = step if direction == 1 else step.conj()
        for k in range(0 if direction == 1 else 1, nmax + 1):
            n = direction * k
            q = alpha + 2.0 * np.pi * n / L
            h, dh = _spectral_profile(q, Y, eta)
            coef = -1.0 / (4.0 * L * abs(q))
            term = (coef * h) * ex
            val += term
            if want_grad:
                gx += (1j * q) * term
                gy += (coef * dh) * ex
            if k == nmax:
                last = max(last, float(np.max(np.abs(coef * h))) if np.size(h) else 0.0)
            ex = ex * mult
    if params.q_cutoff is not None and last > tol * max(1.0, float(np.max(np.abs(val)))):
        raise AccuracyError(
            f"spectral cutoff {params.q_cutoff} too small: last term {last:.3e} exceeds target tolerance",
            residual=last,
        )
    if want_grad:
        return val, np.stack([gx, gy], axis=-1)
    return val


def qp_green(x, y, qp, params=DEFAULT_PARAMS):
    """Alpha-quasiperiodic quasi-static Green's function G(x, y).

    Broadcasts over the leading dimensions of ``x`` and ``y`` (last axis 2).
    """
    _check_alpha(qp)
    X, Y = _split(x, y)
    out = _ewald(X, Y, qp, params, want_grad=False)
    return complex(out) if out.ndim == 0 else out


def qp_green_regular(x, y, qp, params=DEFAULT_PARAMS):
    """``G(x, y) - log|x - y|/(2 pi)``: smooth across ``x = y``."""
    _check_alpha(qp)
    X, Y = _split(x, y)
    out = _ewald(X, Y, qp, params, want_grad=False, drop_center=True)
    return complex(out) if out.ndim == 0 else out


def qp_green_gradient(x, y, qp, params=DEFAULT_PARAMS):
    """Gradient of :func:`qp_green` with respect to ``x``, shape ``(..., 2)``."""
    _check_alpha(qp)
    X, Y = _split(x, y)
    _, grad = _ewald(X, Y, qp, params, want_grad=True)
    return grad


def qp_green_regular_gradient(x, y, qp, params=DEFAULT_PARAMS):
    _check_alpha(qp)
    X, Y = _split(x, y)
    _, grad = _ewald(X, Y, qp, params, want_grad=True, drop_center=True)
    return grad


def qp_green_spectral(x, y, qp, n_terms=100_000, chunk=20_000):
    """Plain spectral partial sum over ``|n| <= n_terms`` (slow reference).

    Converges exponentially off the lattice axis and only like ``1/n_terms``
    on it.
    """
    _check_alpha(qp)
    X, Y = _split(x, y)
    X = np.atleast_1d(X)[..., None]
    Y = np.atleast_1d(Y)[..., None]
    acc = np.zeros(np.broadcast(X, Y).shape[:-1], dtype=complex)
    # sum small terms first for stability
    ns = np.arange(-n_terms, n_terms + 1)
    ns = ns[np.argsort(-np.abs(ns), kind="stable")]
    for start in range(0, ns.size, chunk):
        n = ns[start:start + chunk]
        q = qp.alpha + 2.0 * np.pi * n / qp.L
        acc += np.sum(np.exp(1j * q * X - np.abs(q) * np.abs(Y)) / np.abs(q), axis=-1)
    out = -acc / (2.0 * qp.L)
    shape = np.broadcast(*_split(x, y)).shape
    out = out.reshape(shape)
    return complex(out) if out.ndim == 0 else out


def oracle_comparison(L, n_points=100, n_terms=100_000, seed=0, min_offset=0.05, params=DEFAULT_PARAMS):
    """Compare :func:`qp_green` with the spectral partial sum at random points.

    Each sample draws its own ``alpha`` (away from the zone centre) and a
    pair of points in ``[-L, L] x [-2, 2]`` whose vertical offset is at
    least ``min_offset``, where the partial sum converges exponentially.
    Returns ``(alphas, x, y, accelerated, oracle)``.
    """
    rng = np.random.default_rng(seed)
    alphas = np.empty(n_points)
    x = np.empty((n_points, 2))
    y = np.empty((n_points, 2))
    for k in range(n_points):
        a = 0.0
        while abs(a) < 0.05 * np.pi / L:
            a = rng.uniform(-np.pi / L, np.pi / L)
        while True:
            p = rng.uniform([-L, -2.0], [L, 2.0])
            q = rng.uniform([-L, -2.0], [L, 2.0])
            if abs(p[1] - q[1]) >= min_offset:
                break
        alphas[k], x[k], y[k] = a, p, q
    fast = np.array([qp_green(x[k], y[k], QuasiPeriodicity(alphas[k], L), params) for k in range(n_points)])
    slow = np.array([qp_green_spectral(x[k], y[k], QuasiPeriodicity(alphas[k], L), n_terms)
                     for k in range(n_points)])
    return alphas, x, y, fast, slow
