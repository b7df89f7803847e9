"""Pure-Python PM-EB kernel, used when the compiled extension is absent.

Must stay arithmetically identical to ``_kernel.pyx``: same operations in
the same order, so switching backends is bit-for-bit transparent.
"""

from math import log, sqrt

import numpy as np

BACKEND = "python"


def step(t, sum_lx, sum_l, sum_psi, sum_x, sum_dev, log_inv_alpha, x):
    """Advance the PM-EB accumulators by one observation.

    Returns (t, sum_lx, sum_l, sum_psi, sum_x, sum_dev, lower) after the
    update, with ``lower`` already clipped to [0, 1].
    """
    mu_prev = (0.5 + sum_x) / (t + 1.0)
    sig2_prev = (0.25 + sum_dev) / (t + 1.0)
    tn = t + 1
    lam = sqrt(2.0 * log_inv_alpha / (sig2_prev * tn * log(tn + 1.0)))
    if lam > 0.5:
        lam = 0.5
    v = 4.0 * (x - mu_prev) * (x - mu_prev)
    psi = (-log(1.0 - lam) - lam) / 4.0
    sum_lx += lam * x
    sum_l += lam
    sum_psi += v * psi
    sum_x += x
    mu_new = (0.5 + sum_x) / (tn + 1.0)
    sum_dev += (x - mu_new) * (x - mu_new)
    lower = (sum_lx - log_inv_alpha - sum_psi) / sum_l
    if lower < 0.0:
        lower = 0.0
    elif lower > 1.0:
        lower = 1.0
    return tn, sum_lx, sum_l, sum_psi, sum_x, sum_dev, lower


def lower_path(xs, log_inv_alpha):
    """Per-step clipped lower bounds for a whole stream of values in [0, 1]."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty(xs.shape[0])
    t = 0
    sum_lx = sum_l = sum_psi = sum_x = sum_dev = 0.0
    for i in range(xs.shape[0]):
        t, sum_lx, sum_l, sum_psi, sum_x, sum_dev, lower = step(
            t, sum_lx, sum_l, sum_psi, sum_x, sum_dev, log_inv_alpha, xs[i]
        )
        out[i] = lower
    return out
