"""Pure numpy implementations of the hot loops (fallback backend)."""

from __future__ import annotations

import numpy as np


def trig_velocity(x: np.ndarray, modes: np.ndarray, coefs: np.ndarray) -> np.ndarray:
    """Velocity ``sum_m (c_s sin(l.x) + c_c cos(l.x)) * perp(l)`` at points ``x``."""
    phase = x @ modes.T
    amp = np.sin(phase) * coefs[:, 0] + np.cos(phase) * coefs[:, 1]
    out = np.empty_like(x)
    out[:, 0] = -(amp @ modes[:, 1])
    out[:, 1] = amp @ modes[:, 0]
    return out


def rk4_trig_flow(points, modes, coefs, steps, record):
    """Classical RK4 through a trigonometric drift with tabulated coefficients.

    Args:
        points: ``(P, 2)`` start positions.
        modes: ``(M, 2)`` wave vectors.
        coefs: ``(S, 3, M, 2)`` sine/cosine amplitudes at the start, midpoint
            and end of each of the ``S`` steps.
        steps: ``(S,)`` signed step lengths.
        record: sorted step counts (0..S) after which positions are stored.

    Returns:
        ``(len(record), P, 2)`` array of unwrapped positions.
    """
    x = np.array(points, dtype=float)
    modes = np.asarray(modes, dtype=float)
    record = np.asarray(record, dtype=np.int64)
    out = np.empty((len(record),) + x.shape)
    r = 0
    while r < len(record) and record[r] == 0:
        out[r] = x
        r += 1
    for k, h in enumerate(np.asarray(steps, dtype=float)):
        c0, cm, c1 = coefs[k, 0], coefs[k, 1], coefs[k, 2]
        k1 = trig_velocity(x, modes, c0)
        k2 = trig_velocity(x + 0.5 * h * k1, modes, cm)
        k3 = trig_velocity(x + 0.5 * h * k2, modes, cm)
        k4 = trig_velocity(x + h * k3, modes, c1)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        while r < len(record) and record[r] == k + 1:
            out[r] = x
            r += 1
    return out
