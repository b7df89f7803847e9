"""Anytime-valid lower confidence sequence (PM-EB) and Hoeffding interval.

The per-observation PM-EB update is the hot inner loop of every monitor
and simulation; it lives in a small compiled extension with a pure-Python
fallback selected here at import time. Both backends are arithmetically
identical, so results do not depend on which one is loaded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput

try:
    from . import _kernel as _backend
except ImportError:  # extension not built; pure-Python fallback
    from . import _reference as _backend

BACKEND = _backend.BACKEND


def hoeffding_halfwidth(n: int, alpha: float) -> float:
    """Half-width of the fixed-n two-sided Hoeffding interval for a mean
    of [0, 1]-valued variables: sqrt(ln(2/alpha) / (2n))."""
    if n < 1 or int(n) != n:
        raise InvalidInput(f"sample count must be a positive integer, got {n}")
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"miscoverage level must lie in (0, 1), got {alpha}")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


@dataclass(frozen=True)
class PmEbState:
    """Accumulators of the predictably-mixed empirical-Bernstein lower
    confidence sequence for a running mean of [0, 1]-valued variables.

    ``best_lower`` is the running maximum of the per-step lower bounds;
    intersecting a confidence sequence over time keeps it valid.
    """

    alpha: float
    t: int = 0
    sum_lx: float = 0.0
    sum_l: float = 0.0
    sum_psi: float = 0.0
    sum_x: float = 0.0
    sum_dev: float = 0.0
    best_lower: float = 0.0

    @property
    def mu_hat(self) -> float:
        """Shrunk running mean (1/2 + sum X_i) / (t + 1)."""
        return (0.5 + self.sum_x) / (self.t + 1.0)

    @property
    def sigma2_hat(self) -> float:
        """Shrunk running variance (1/4 + sum (X_i - mu_i)^2) / (t + 1)."""
        return (0.25 + self.sum_dev) / (self.t + 1.0)


def pmeb_fresh(alpha: float) -> PmEbState:
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"miscoverage level must lie in (0, 1), got {alpha}")
    return PmEbState(alpha=alpha)


def pmeb_update(state: PmEbState, x: float) -> PmEbState:
    """Feed one observation in [0, 1] into the confidence sequence."""
    if not 0.0 <= x <= 1.0:
        raise InvalidInput(
            f"PM-EB observations must lie in [0, 1], got {x}; an unnormalized "
            "error reached the monitor"
        )
    t, sum_lx, sum_l, sum_psi, sum_x, sum_dev, lower = _backend.step(
        state.t,
        state.sum_lx,
        state.sum_l,
        state.sum_psi,
        state.sum_x,
        state.sum_dev,
        math.log(1.0 / state.alpha),
        float(x),
    )
    return PmEbState(
        alpha=state.alpha,
        t=t,
        sum_lx=sum_lx,
        sum_l=sum_l,
        sum_psi=sum_psi,
        sum_x=sum_x,
        sum_dev=sum_dev,
        best_lower=max(state.best_lower, lower),
    )


def pmeb_lower(state: PmEbState) -> float:
    """Current anytime-valid lower bound; vacuous 0 before any data."""
    return state.best_lower


def pmeb_lower_path(xs, alpha: float) -> np.ndarray:
    """Per-step clipped lower bounds over a whole stream (no running max).

    Batch equivalent of repeated ``pmeb_update``: entry i equals the bound
    a streaming state would report after observation i.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"miscoverage level must lie in (0, 1), got {alpha}")
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1:
        raise InvalidInput("stream must be one-dimensional")
    if xs.size and (xs.min() < 0.0 or xs.max() > 1.0):
        raise InvalidInput("PM-EB observations must lie in [0, 1]")
    return _backend.lower_path(xs, math.log(1.0 / alpha))


def pmeb_best_lower_path(xs, alpha: float) -> np.ndarray:
    """Running-maximum (intersected) lower-bound trajectory."""
    return np.maximum.accumulate(pmeb_lower_path(xs, alpha))
