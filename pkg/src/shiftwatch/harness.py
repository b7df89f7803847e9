"""End-to-end experiment runner and suite metrics.

One experiment = ablate a source dataset per a shift scenario, run the
full calibration pipeline on the retained pool, stream a simulated
production environment, and record the margin trajectory of every
detector (plug-in and labeled-oracle variants). Suite metrics aggregate
power, FDP, and detection times across many such runs, judging each
detector family against its own oracle's ground-truth harmfulness.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .calibration import GridSpec, calibrate
from .core import Dataset, Selector
from .errors import CalibrationInfeasible, InvalidInput
from .estimator import fit_knn, predict_many, r_squared, score_dataset, split_half
from .monitor import (
    MonitorConfig,
    SourceStats,
    delta_diagnostic,
    first_alarm_time,
    mean_lower_path,
    oracle_source_statistics,
    quantile_lower_path,
    source_mean_upper,
    source_statistics,
)
from .shiftsim import ProductionStream, Schedule, ShiftScenario, build_stream, split_pools

SCHEMA_VERSION = 1

PLUGIN_DETECTORS = ("phi_q", "phi_q2", "mean")
_ORACLE_KEY = {"phi_q": "oracle_q", "phi_q2": "oracle_q2", "mean": "oracle_mean"}
_PLUGIN_KEY = {"phi_q": "plugin_q", "phi_q2": "plugin_q2", "mean": "plugin_mean"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs shared by every run in a suite."""

    k: int = 10
    grid: GridSpec = field(default_factory=GridSpec)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    horizon: int = 2000
    train_frac: float = 0.6
    test_frac: float = 0.2


@dataclass(frozen=True)
class DetectorTrace:
    """Margin trajectory of one detector: margin_t = lower_t - upper.

    The detector at tolerance eps alarms iff some margin exceeds eps, so
    one trajectory answers every tolerance sweep."""

    margins: np.ndarray

    @property
    def max_margin(self) -> float:
        return float(self.margins.max()) if self.margins.size else float("-inf")

    def first_alarm(self, eps_tol: float) -> Optional[int]:
        return first_alarm_time(self.margins, eps_tol)


@dataclass
class RunReport:
    scenario_id: str
    seed: int
    horizon: int
    eps_tol: float
    uncalibratable: bool = False
    r2: Optional[float] = None
    calib_power: Optional[float] = None
    calib_fdp: Optional[float] = None
    selector: Optional[Selector] = None
    delta: Optional[float] = None
    n_clipped: int = 0
    traces: Dict[str, DetectorTrace] = field(default_factory=dict)

    def first_alarm(self, key: str, eps_tol: Optional[float] = None) -> Optional[int]:
        eps = self.eps_tol if eps_tol is None else eps_tol
        return self.traces[key].first_alarm(eps)

    def to_dict(self, include_margins: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "horizon": self.horizon,
            "eps_tol": self.eps_tol,
            "uncalibratable": self.uncalibratable,
            "r2": self.r2,
            "calib_power": self.calib_power,
            "calib_fdp": self.calib_fdp,
            "selector": None
            if self.selector is None
            else dataclasses.asdict(self.selector),
            "delta": self.delta,
            "n_clipped": self.n_clipped,
            "detectors": {
                key: {
                    "first_alarm": trace.first_alarm(self.eps_tol),
                    "max_margin": trace.max_margin,
                }
                for key, trace in sorted(self.traces.items())
            },
        }
        if include_margins:
            for key, trace in self.traces.items():
                out["detectors"][key]["margins"] = trace.margins.tolist()
        return out


_KIND_CODE = {"above_median": 0, "below_median": 1, "category": 2}


def _sub_seeds(seed: int, scenario: ShiftScenario) -> Tuple[int, int, int]:
    # stable across processes: never use hash() here
    tag = (scenario.feature_index << 2) | _KIND_CODE[scenario.split_kind]
    if scenario.category_value is not None:
        cat_bits = int(np.float64(scenario.category_value).view(np.int64)) & 0xFFFFFFFF
    else:
        cat_bits = 0
    ss = np.random.SeedSequence([int(seed), tag, cat_bits])
    return tuple(int(c.generate_state(1)[0]) for c in ss.spawn(3))


def _partition(data: Dataset, train_frac: float, test_frac: float, seed: int):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    n_train = int(train_frac * data.n)
    n_test = int(test_frac * data.n)
    train = data.subset(perm[:n_train])
    test = data.subset(perm[n_train : n_train + n_test])
    calib = data.subset(perm[n_train + n_test :])
    return train, test, calib


def run_experiment(
    source: Dataset,
    scenario: ShiftScenario,
    schedule: Schedule,
    config: ExperimentConfig,
    seed: int,
) -> RunReport:
    """One full pipeline run; deterministic given (source, scenario,
    schedule, config, seed).

    Pipeline: ablate pools, partition the retained pool into
    train/test/calibration, fit the error estimator on half the
    calibration set, calibrate the selector on the other half, compute
    source statistics, simulate the production stream, and run all six
    detectors (plug-in and oracle variants of the two quantile statistics
    and the mean statistic).
    """
    if source.errors is None:
        raise InvalidInput("experiments need a labeled source dataset")
    ablate_seed, part_seed, stream_seed = _sub_seeds(seed, scenario)
    scenario = dataclasses.replace(scenario, seed=ablate_seed)
    retained, excluded = split_pools(source, scenario)
    _, test, calib = _partition(retained, config.train_frac, config.test_frac, part_seed)

    report = RunReport(
        scenario_id=scenario.scenario_id,
        seed=seed,
        horizon=schedule.horizon,
        eps_tol=config.monitor.eps_tol,
    )

    fit_half, cal_half = split_half(calib, part_seed + 1)
    model = fit_knn(fit_half, min(config.k, fit_half.n))
    cal_scored = score_dataset(model, cal_half)
    report.r2 = r_squared(cal_scored.scores, cal_half.errors)

    try:
        calres = calibrate(config.grid, cal_scored)
    except CalibrationInfeasible:
        report.uncalibratable = True
        return report
    selector = calres.selector
    report.selector = selector
    report.calib_power = calres.power
    report.calib_fdp = calres.fdp

    mon_cfg = config.monitor
    stats = source_statistics(cal_scored, selector, mon_cfg)
    oracle_stats = oracle_source_statistics(cal_scored, selector, mon_cfg)
    upper_mean = source_mean_upper(cal_scored.errors, mon_cfg.alpha_source)

    stream = build_stream(test, excluded, schedule, stream_seed)
    stream_scores = predict_many(model, stream.features)

    # plug-in quantile detectors share one lower-bound trajectory
    sel_plugin = (stream_scores > selector.q_hat).astype(float)
    l_plugin = quantile_lower_path(sel_plugin, stats, mon_cfg)
    # oracle: selection is the true-error flag, false discoveries impossible
    sel_oracle = (stream.errors > selector.q).astype(float)
    l_oracle = quantile_lower_path(sel_oracle, oracle_stats, mon_cfg)
    # mean detectors
    clipped = np.clip(stream_scores, 0.0, 1.0)
    report.n_clipped = int((stream_scores != clipped).sum())
    low_mean_plugin = mean_lower_path(clipped, mon_cfg)
    low_mean_oracle = mean_lower_path(stream.errors, mon_cfg)

    report.traces = {
        "plugin_q": DetectorTrace(l_plugin - stats.u_q),
        "plugin_q2": DetectorTrace(l_plugin - stats.u_q2),
        "oracle_q": DetectorTrace(l_oracle - oracle_stats.u_q),
        "oracle_q2": DetectorTrace(l_oracle - oracle_stats.u_q2),
        "plugin_mean": DetectorTrace(low_mean_plugin - upper_mean),
        "oracle_mean": DetectorTrace(low_mean_oracle - upper_mean),
    }
    report.delta = delta_diagnostic(
        Dataset(stream.features, stream.errors, stream_scores), selector, stats
    )
    return report


def ground_truth_harmful(
    stream: ProductionStream,
    family: str,
    eps_harm: float,
    *,
    selector: Selector,
    source_scored: Dataset,
    monitor_config: MonitorConfig,
) -> bool:
    """Run a detector family on the stream's true errors and report whether
    it would ever alarm at tolerance ``eps_harm``.

    Quantile families replace the selector flag by the true-error flag
    1{E > q}; the mean family is the labeled-oracle mean detector.
    """
    if stream.errors is None:
        raise InvalidInput("ground-truth harmfulness needs true errors on the stream")
    if family not in PLUGIN_DETECTORS:
        raise InvalidInput(f"unknown detector family {family!r}")
    if family == "mean":
        lowers = mean_lower_path(stream.errors, monitor_config)
        upper = source_mean_upper(source_scored.errors, monitor_config.alpha_source)
        margins = lowers - upper
    else:
        oracle_stats = oracle_source_statistics(source_scored, selector, monitor_config)
        sel = (stream.errors > selector.q).astype(float)
        l_q = quantile_lower_path(sel, oracle_stats, monitor_config)
        upper = oracle_stats.u_q if family == "phi_q" else oracle_stats.u_q2
        margins = l_q - upper
    return first_alarm_time(margins, eps_harm) is not None


@dataclass(frozen=True)
class SuiteMetrics:
    detector: str
    eps_harm: float
    n_runs: int
    n_harmful: int
    n_alarms: int
    power: Optional[float]
    fdp: Optional[float]
    mean_detection_time: Optional[float]
    mean_oracle_time_gap: Optional[float]

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **dataclasses.asdict(self)}


def suite_metrics(
    reports: Sequence[RunReport],
    detector: str,
    eps_harm: float,
    eps_tol: Optional[float] = None,
) -> SuiteMetrics:
    """Aggregate one plug-in detector over a suite of runs.

    Ground truth per run comes from the same family's oracle trace at
    tolerance ``eps_harm``; the plug-in alarms at its configured eps_tol
    unless overridden. Means over empty sets are reported as None, never 0.
    """
    if not reports:
        raise InvalidInput("suite metrics need at least one run report")
    if detector not in PLUGIN_DETECTORS:
        raise InvalidInput(f"unknown detector family {detector!r}")
    plugin_key = _PLUGIN_KEY[detector]
    oracle_key = _ORACLE_KEY[detector]

    usable = [r for r in reports if not r.uncalibratable]
    harmful, alarmed, det_times, gaps = [], [], [], []
    for r in usable:
        is_harmful = r.traces[oracle_key].max_margin > eps_harm
        t_plugin = r.first_alarm(plugin_key, eps_tol)
        harmful.append(is_harmful)
        alarmed.append(t_plugin is not None)
        if t_plugin is not None and is_harmful:
            det_times.append(t_plugin)
        t_oracle = r.first_alarm(oracle_key, eps_tol)
        if t_plugin is not None and t_oracle is not None:
            gaps.append(abs(t_plugin - t_oracle))

    harmful = np.array(harmful, dtype=bool)
    alarmed = np.array(alarmed, dtype=bool)
    n_harmful = int(harmful.sum())
    n_alarms = int(alarmed.sum())
    true_pos = int((alarmed & harmful).sum())
    false_pos = int((alarmed & ~harmful).sum())
    return SuiteMetrics(
        detector=detector,
        eps_harm=eps_harm,
        n_runs=len(usable),
        n_harmful=n_harmful,
        n_alarms=n_alarms,
        power=None if n_harmful == 0 else true_pos / n_harmful,
        fdp=None if n_alarms == 0 else false_pos / n_alarms,
        mean_detection_time=None if not det_times else float(np.mean(det_times)),
        mean_oracle_time_gap=None if not gaps else float(np.mean(gaps)),
    )


def suite_metrics_by_r2(
    reports: Sequence[RunReport], detector: str, eps_harm: float, n_bins: int = 10
) -> List[dict]:
    """Suite metrics grouped by estimator-R^2 decile; bins partition the
    usable reports exactly."""
    usable = [r for r in reports if not r.uncalibratable]
    if not usable:
        return []
    r2s = np.array([r.r2 for r in usable])
    edges = np.quantile(r2s, np.linspace(0.0, 1.0, n_bins + 1))
    bins = np.clip(np.searchsorted(edges, r2s, side="right") - 1, 0, n_bins - 1)
    out = []
    for b in range(n_bins):
        members = [r for r, k in zip(usable, bins) if k == b]
        if not members:
            continue
        out.append(
            {
                "bin": b,
                "r2_low": float(edges[b]),
                "r2_high": float(edges[b + 1]),
                "count": len(members),
                "metrics": suite_metrics(members, detector, eps_harm).to_dict(),
            }
        )
    return out


def _run_one(args):
    source, scenario, schedule, config, seed = args
    return run_experiment(source, scenario, schedule, config, seed)


def run_suite(
    source: Dataset,
    scenarios: Sequence[ShiftScenario],
    schedule: Schedule,
    config: ExperimentConfig,
    seeds: Sequence[int],
    workers: int = 1,
) -> List[RunReport]:
    """Cross product of scenarios and seeds, optionally over worker
    processes; the report order is deterministic either way."""
    jobs = [
        (source, scenario, schedule, config, seed)
        for scenario in scenarios
        for seed in seeds
    ]
    if workers <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def reports_to_json(reports: Sequence[RunReport], include_margins: bool = False) -> str:
    return json.dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "runs": [r.to_dict(include_margins) for r in reports],
        },
        sort_keys=True,
    )
