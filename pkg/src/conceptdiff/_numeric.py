"""Private numeric helpers."""

from __future__ import annotations

import numpy as np


def stable_sigmoid(z):
    """Logistic function without overflow for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log1pexp(z):
    """log(1 + exp(z)) evaluated stably."""
    return np.logaddexp(0.0, z)
