"""Central finite differences for checking hand-written gradients."""

import numpy as np


def central_difference(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """d fn / d x for a scalar-valued fn, perturbing x in place one entry at a time."""
    assert x.flags.c_contiguous, "perturbation needs a contiguous array"
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a − n| / max(|a| + |n|), 0 when both vanish."""
    denom = float(np.max(np.abs(analytic) + np.abs(numeric)))
    if denom == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / denom)
