"""Grid-search calibration of the threshold pair (q, q_hat).

Sweeps a grid of quantile levels, computes selector power and false
discovery proportion for every cell on held-out labeled source data, and
picks the maximum-power cell among those with FDP under the cap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .core import Dataset, Selector, empirical_quantile
from .errors import CalibrationInfeasible, InvalidInput

DEFAULT_P_VALUES = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))  # 0.50..0.95
DEFAULT_P_HAT_VALUES = tuple(round(0.1 * i, 1) for i in range(1, 10))  # 0.1..0.9
DEFAULT_FDP_MAX = 0.2


@dataclass(frozen=True)
class GridSpec:
    p_values: tuple = DEFAULT_P_VALUES
    p_hat_values: tuple = DEFAULT_P_HAT_VALUES
    fdp_max: float = DEFAULT_FDP_MAX

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(self.p_values))
        object.__setattr__(self, "p_hat_values", tuple(self.p_hat_values))
        if not self.p_values or not self.p_hat_values:
            raise InvalidInput("grid value lists must be nonempty")
        if list(self.p_values) != sorted(set(self.p_values)):
            raise InvalidInput("p_values must be strictly increasing")
        if list(self.p_hat_values) != sorted(set(self.p_hat_values)):
            raise InvalidInput("p_hat_values must be strictly increasing")
        if any(not 0.5 <= p < 1.0 for p in self.p_values):
            raise InvalidInput("p values must lie in [0.5, 1)")
        if any(not 0.0 < p < 1.0 for p in self.p_hat_values):
            raise InvalidInput("p_hat values must lie in (0, 1)")
        if not 0.0 < self.fdp_max < 1.0:
            raise InvalidInput("fdp_max must lie in (0, 1)")


@dataclass(frozen=True)
class GridCell:
    p: float
    p_hat: float
    q: float
    q_hat: float
    power: float
    fdp: float
    n_positive: int  # {E > q}
    n_selected: int  # {score > q_hat}
    qualifying: bool

    @property
    def degenerate(self) -> bool:
        """A 0/0 convention fired: no positives or no selections."""
        return self.n_positive == 0 or self.n_selected == 0


@dataclass(frozen=True)
class CalibrationResult:
    selector: Selector
    power: float
    fdp: float
    grid_report: Tuple[GridCell, ...] = field(repr=False)


def selector_metrics(selector: Selector, data: Dataset):
    """(power, fdp) of the high-error flag against true errors.

    Conventions: power := 1 when nothing exceeds q; fdp := 0 when nothing
    is selected.
    """
    if data.errors is None or data.scores is None:
        raise InvalidInput("selector metrics need both true errors and scores")
    selected = data.scores > selector.q_hat
    positive = data.errors > selector.q
    n_pos = int(positive.sum())
    n_sel = int(selected.sum())
    power = 1.0 if n_pos == 0 else float((selected & positive).sum()) / n_pos
    fdp = 0.0 if n_sel == 0 else float((selected & ~positive).sum()) / n_sel
    return power, fdp


def calibrate(grid: GridSpec, data: Dataset) -> CalibrationResult:
    """Evaluate every grid cell and return the best qualifying selector.

    Qualifying = FDP strictly under the cap and not degenerate (cells where
    a 0/0 convention decided the value are reported but never chosen).
    Ties break toward lowest FDP, then largest p, then smallest p_hat.
    """
    if data.errors is None or data.scores is None:
        raise InvalidInput("calibration needs both true errors and scores")

    errors = data.errors
    scores = data.scores
    report: List[GridCell] = []
    for p in grid.p_values:
        q = empirical_quantile(p, errors)
        positive = errors > q
        n_pos = int(positive.sum())
        for p_hat in grid.p_hat_values:
            q_hat = empirical_quantile(p_hat, scores)
            selected = scores > q_hat
            n_sel = int(selected.sum())
            power = 1.0 if n_pos == 0 else float((selected & positive).sum()) / n_pos
            fdp = 0.0 if n_sel == 0 else float((selected & ~positive).sum()) / n_sel
            report.append(
                GridCell(
                    p=p,
                    p_hat=p_hat,
                    q=q,
                    q_hat=q_hat,
                    power=power,
                    fdp=fdp,
                    n_positive=n_pos,
                    n_selected=n_sel,
                    qualifying=fdp < grid.fdp_max and n_pos > 0 and n_sel > 0,
                )
            )

    eligible = [c for c in report if c.qualifying]
    if not eligible:
        best = min(report, key=lambda c: (c.fdp, -c.power))
        raise CalibrationInfeasible(best.fdp, best)
    chosen = max(eligible, key=lambda c: (c.power, -c.fdp, c.p, -c.p_hat))
    return CalibrationResult(
        selector=Selector(q=chosen.q, q_hat=chosen.q_hat, p=chosen.p, p_hat=chosen.p_hat),
        power=chosen.power,
        fdp=chosen.fdp,
        grid_report=tuple(report),
    )


def write_grid_report(path, report) -> None:
    """Export the per-cell table as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "p_hat", "q", "q_hat", "power", "fdp", "qualifying"])
        for c in report:
            writer.writerow(
                [c.p, c.p_hat, repr(c.q), repr(c.q_hat), repr(c.power), repr(c.fdp), int(c.qualifying)]
            )
