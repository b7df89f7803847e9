"""Sequential detectors.

Quantile detectors compare a lower confidence-sequence bound on the
production high-error rate against upper bounds computed once on labeled
source data; the mean detectors compare a lower bound on the running mean
of errors (or estimated scores) against a source-mean upper bound. All
alarms latch: once fired, a detector stays fired.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .confidence import (
    PmEbState,
    hoeffding_halfwidth,
    pmeb_best_lower_path,
    pmeb_fresh,
    pmeb_lower,
    pmeb_update,
)
from .core import Dataset, Selector, StreamEvent
from .errors import InvalidInput


@dataclass(frozen=True)
class MonitorConfig:
    """Miscoverage budget and tolerances.

    ``alpha_prod`` is split between the production confidence sequence
    (alpha1) and the source false-discovery interval (alpha2); by default
    50/50. ``delta_corr`` is the additive lower-bound correction covering
    violations of the source-to-production false-discovery assumption.
    """

    alpha_source: float = 0.05
    alpha_prod: float = 0.05
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    eps_tol: float = 0.0
    delta_corr: float = 0.0

    def __post_init__(self):
        if self.alpha1 is None:
            object.__setattr__(self, "alpha1", self.alpha_prod / 2.0)
        if self.alpha2 is None:
            object.__setattr__(self, "alpha2", self.alpha_prod / 2.0)
        for name in ("alpha_source", "alpha_prod", "alpha1", "alpha2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidInput(f"{name} must lie in (0, 1), got {v}")
        if abs(self.alpha1 + self.alpha2 - self.alpha_prod) > 1e-12:
            raise InvalidInput("alpha1 + alpha2 must equal alpha_prod")
        if self.eps_tol < 0.0:
            raise InvalidInput("eps_tol must be >= 0")
        if self.delta_corr < 0.0:
            raise InvalidInput("delta_corr must be >= 0")


@dataclass(frozen=True)
class SourceStats:
    """Empirical source rates plus Hoeffding half-widths.

    ``u_q`` upper-bounds the source probability of a true error above q;
    ``u_q2`` upper-bounds the probability of a true discovery (selected and
    above q). ``w_fd`` is the half-width attached to the false-discovery
    rate inside the production lower bound.
    """

    n: int
    rate_above_q: float
    rate_true_discovery: float
    rate_false_discovery: float
    w_source: float
    w_fd: float

    @property
    def u_q(self) -> float:
        return self.rate_above_q + self.w_source

    @property
    def u_q2(self) -> float:
        return self.rate_true_discovery + self.w_source

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "rate_above_q": self.rate_above_q,
            "rate_true_discovery": self.rate_true_discovery,
            "rate_false_discovery": self.rate_false_discovery,
            "w_source": self.w_source,
            "w_fd": self.w_fd,
            "u_q": self.u_q,
            "u_q2": self.u_q2,
        }


def source_statistics(source: Dataset, selector: Selector, config: MonitorConfig) -> SourceStats:
    """Compute the source-side rates feeding every quantile-detector bound.

    Indicator conventions: strictly above q counts as high error, at or
    below q counts as low; selection uses strictly above q_hat.
    """
    if source.errors is None or source.scores is None:
        raise InvalidInput("source statistics need both true errors and scores")
    n = source.n
    above = source.errors > selector.q
    selected = source.scores > selector.q_hat
    return SourceStats(
        n=n,
        rate_above_q=float(above.sum()) / n,
        rate_true_discovery=float((selected & above).sum()) / n,
        rate_false_discovery=float((selected & ~above).sum()) / n,
        w_source=hoeffding_halfwidth(n, config.alpha_source),
        w_fd=hoeffding_halfwidth(n, config.alpha2),
    )


def oracle_source_statistics(source: Dataset, selector: Selector, config: MonitorConfig) -> SourceStats:
    """Source stats for the labeled-oracle quantile detector, whose selector
    is the true-error flag 1{E > q} itself (zero false discoveries by
    construction)."""
    if source.errors is None:
        raise InvalidInput("oracle statistics need true errors")
    oracle = Dataset(source.features, source.errors, source.errors)
    return source_statistics(
        oracle, Selector(q=selector.q, q_hat=selector.q, p=selector.p, p_hat=selector.p), config
    )


@dataclass(frozen=True)
class AlarmDecision:
    t: int
    l_q: float
    u_q: float
    u_q2: float
    phi_q: bool
    phi_q2: bool


@dataclass
class TrajectoryRow:
    t: int
    selection_rate: float
    l_q: float
    u_q: float
    u_q2: float
    phi_q: bool
    phi_q2: bool


class MonitorState:
    """Single-writer streaming state of the quantile detectors.

    Feeds the binary selection stream 1{score > q_hat} into a PM-EB
    confidence sequence at level alpha1 and latches the two alarm flags.
    """

    def __init__(self, selector: Selector, source: SourceStats, config: MonitorConfig):
        self.selector = selector
        self.source = source
        self.config = config
        self.t = 0
        self.selection_cs: PmEbState = pmeb_fresh(config.alpha1)
        self.n_selected = 0
        self.phi_q_time: Optional[int] = None
        self.phi_q2_time: Optional[int] = None
        self.trajectory: List[TrajectoryRow] = []

    @property
    def phi_q(self) -> bool:
        return self.phi_q_time is not None

    @property
    def phi_q2(self) -> bool:
        return self.phi_q2_time is not None

    def observe(self, event: StreamEvent, score: float) -> AlarmDecision:
        if event.t <= self.t:
            raise InvalidInput(
                f"events must arrive in strictly increasing time order "
                f"(got t={event.t} after t={self.t})"
            )
        self.t += 1
        flag = 1.0 if score > self.selector.q_hat else 0.0
        self.n_selected += int(flag)
        self.selection_cs = pmeb_update(self.selection_cs, flag)
        l_q = (
            pmeb_lower(self.selection_cs)
            - (self.source.rate_false_discovery + self.source.w_fd)
            - self.config.delta_corr
        )
        if l_q < 0.0:
            l_q = 0.0
        if self.phi_q_time is None and l_q > self.source.u_q + self.config.eps_tol:
            self.phi_q_time = self.t
        if self.phi_q2_time is None and l_q > self.source.u_q2 + self.config.eps_tol:
            self.phi_q2_time = self.t
        self.trajectory.append(
            TrajectoryRow(
                t=self.t,
                selection_rate=self.n_selected / self.t,
                l_q=l_q,
                u_q=self.source.u_q,
                u_q2=self.source.u_q2,
                phi_q=self.phi_q,
                phi_q2=self.phi_q2,
            )
        )
        return AlarmDecision(
            t=self.t,
            l_q=l_q,
            u_q=self.source.u_q,
            u_q2=self.source.u_q2,
            phi_q=self.phi_q,
            phi_q2=self.phi_q2,
        )


def quantile_lower_path(selection, source: SourceStats, config: MonitorConfig) -> np.ndarray:
    """Batch trajectory of the corrected production lower bound L_q.

    Identical arithmetic to repeated ``MonitorState.observe``; used by the
    experiment harness where whole streams are available upfront.
    """
    selection = np.asarray(selection, dtype=float)
    lowers = pmeb_best_lower_path(selection, config.alpha1)
    l_q = lowers - (source.rate_false_discovery + source.w_fd) - config.delta_corr
    np.clip(l_q, 0.0, None, out=l_q)
    return l_q


def first_alarm_time(margins: np.ndarray, eps_tol: float) -> Optional[int]:
    """First 1-based index where the margin strictly exceeds eps_tol."""
    hits = np.nonzero(margins > eps_tol)[0]
    return int(hits[0]) + 1 if hits.size else None


class MeanMonitorState:
    """Streaming mean detector: PM-EB lower bound on the running mean of a
    [0, 1]-valued stream against a fixed source-mean upper bound.

    Fed with true errors it is the labeled-oracle detector; fed with
    estimated scores (clipped to [0, 1], counted in ``n_clipped``) it is
    the plug-in detector.
    """

    def __init__(self, source_upper: float, config: MonitorConfig, clip_scores: bool = False):
        self.source_upper = source_upper
        self.config = config
        self.clip_scores = clip_scores
        self.t = 0
        self.error_cs: PmEbState = pmeb_fresh(config.alpha_prod)
        self.alarm_time: Optional[int] = None
        self.n_clipped = 0
        self.lowers: List[float] = []

    @property
    def alarm(self) -> bool:
        return self.alarm_time is not None

    def observe(self, value: float) -> bool:
        if self.clip_scores:
            if value < 0.0 or value > 1.0:
                self.n_clipped += 1
                value = min(max(value, 0.0), 1.0)
        elif not 0.0 <= value <= 1.0:
            raise InvalidInput(f"mean detector input must lie in [0, 1], got {value}")
        self.t += 1
        self.error_cs = pmeb_update(self.error_cs, value)
        lower = pmeb_lower(self.error_cs)
        self.lowers.append(lower)
        if self.alarm_time is None and lower > self.source_upper + self.config.eps_tol:
            self.alarm_time = self.t
        return self.alarm


def mean_lower_path(values, config: MonitorConfig, clip_scores: bool = False) -> np.ndarray:
    """Batch trajectory of the mean detector's lower bound."""
    values = np.asarray(values, dtype=float)
    if clip_scores:
        values = np.clip(values, 0.0, 1.0)
    return pmeb_best_lower_path(values, config.alpha_prod)


def source_mean_upper(errors, alpha_source: float) -> float:
    """Source-mean Hoeffding upper bound fed to both mean detectors."""
    errors = np.asarray(errors, dtype=float)
    return float(errors.mean()) + hoeffding_halfwidth(errors.size, alpha_source)


def delta_diagnostic(prod: Dataset, selector: Selector, source: SourceStats) -> float:
    """Signed gap between the production and source false-discovery rates.

    Requires true errors on the production sample (evaluation mode only);
    a non-positive value means the false-discovery assumption held
    empirically.
    """
    if prod.errors is None or prod.scores is None:
        raise InvalidInput("delta diagnostic needs production true errors and scores")
    selected = prod.scores > selector.q_hat
    low = prod.errors <= selector.q
    prod_fd = float((selected & low).sum()) / prod.n
    return prod_fd - source.rate_false_discovery


def write_trajectory_csv(path, trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "selection_rate", "L_q", "U_q", "U_q2", "phi_q", "phi_q2"])
        for row in trajectory:
            writer.writerow(
                [
                    row.t,
                    repr(row.selection_rate),
                    repr(row.l_q),
                    repr(row.u_q),
                    repr(row.u_q2),
                    int(row.phi_q),
                    int(row.phi_q2),
                ]
            )


def trajectory_to_json(trajectory) -> str:
    return json.dumps(
        [
            {
                "t": row.t,
                "selection_rate": row.selection_rate,
                "L_q": row.l_q,
                "U_q": row.u_q,
                "U_q2": row.u_q2,
                "phi_q": row.phi_q,
                "phi_q2": row.phi_q2,
            }
            for row in trajectory
        ]
    )
