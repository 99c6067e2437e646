"""Winding number of a closed polyline in the complex plane."""

import numpy as np

from .errors import SingularWindingError


def winding_number(curve, point=0.0, tol=1e-12):
    """Number of turns of the closed polyline ``curve`` around ``point``.

    The last sample connects back to the first.  Every angle increment is
    taken in (-pi, pi], so the curve must be sampled finely enough that no
    segment sweeps half a turn.
    """
    z = np.asarray(curve, dtype=complex) - point
    if z.size < 2:
        raise ValueError("curve needs at least two samples")
    if np.min(np.abs(z)) <= tol * max(1.0, float(np.max(np.abs(z)))):
        raise SingularWindingError(f"curve passes through {point}")
    steps = np.angle(np.roll(z, -1) / z)
    return int(np.rint(steps.sum() / (2.0 * np.pi)))
