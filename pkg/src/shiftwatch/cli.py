"""Command-line front end.

Subcommands: calibrate, monitor, simulate, evaluate, sweep. All outputs
land under the configured output directory; report payloads contain no
timestamps so reruns with identical config are byte-identical. Exit codes:
0 ok, 1 error, 2 alarm raised (monitor).
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click
import numpy as np

from . import confidence
from .calibration import GridSpec, calibrate, write_grid_report
from .config import AppConfig, parse_config
from .core import Dataset, Selector, StreamEvent, read_dataset, write_dataset
from .errors import CalibrationInfeasible, ConfigError, IngestError, InvalidInput, ShiftwatchError
from .estimator import fit_knn, predict, r_squared, score_dataset, split_half
from .harness import (
    ExperimentConfig,
    reports_to_json,
    run_suite,
    suite_metrics,
    suite_metrics_by_r2,
)
from .monitor import (
    MonitorConfig,
    MonitorState,
    source_statistics,
    write_trajectory_csv,
)
from .shiftsim import Schedule, build_stream, enumerate_scenarios, split_pools

SCHEMA_VERSION = 1


def _fail(exc) -> None:
    raise click.ClickException(str(exc))


def _monitor_config(cfg: AppConfig) -> MonitorConfig:
    return MonitorConfig(
        alpha_source=cfg.alpha_source,
        alpha_prod=cfg.alpha_prod,
        alpha1=cfg.alpha1,
        alpha2=cfg.alpha2,
        eps_tol=cfg.eps_tol,
        delta_corr=cfg.delta_corr,
    )


def _grid_spec(cfg: AppConfig) -> GridSpec:
    kwargs = {"fdp_max": cfg.fdp_max}
    if cfg.p_values:
        kwargs["p_values"] = cfg.p_values
    if cfg.p_hat_values:
        kwargs["p_hat_values"] = cfg.p_hat_values
    return GridSpec(**kwargs)


def _schedule(cfg: AppConfig) -> Schedule:
    onset = cfg.onset
    if cfg.schedule != "none" and onset is None:
        onset = cfg.horizon // 2
    return Schedule(kind=cfg.schedule, horizon=cfg.horizon, onset=onset)


def _feature_kinds(cfg: AppConfig, d: int):
    if cfg.feature_kinds is None:
        return ["continuous"] * d
    kinds = [k.strip() for k in cfg.feature_kinds.split(",")]
    if len(kinds) != d:
        raise ConfigError("feature_kinds", f"expected {d} kinds, got {len(kinds)}")
    return kinds


def _calibration_pipeline(cfg: AppConfig):
    """Shared calibrate/monitor front half.

    Returns (model_or_None, scored calibration dataset, calibration result,
    estimator R^2). When the source file already carries a score column it
    is used directly and no estimator is fitted.
    """
    if cfg.source is None:
        raise ConfigError("source", "a source CSV is required")
    source = read_dataset(cfg.source)
    if source.scores is not None:
        model, cal_scored = None, source
    else:
        fit_half, cal_half = split_half(source, cfg.seed)
        model = fit_knn(fit_half, min(cfg.k, fit_half.n))
        cal_scored = score_dataset(model, cal_half)
    r2 = r_squared(cal_scored.scores, cal_scored.errors)
    calres = calibrate(_grid_spec(cfg), cal_scored)
    return model, cal_scored, calres, r2


def _config_flags(fn):
    fn = click.option("--config", "config_file", type=str, default=None, help="Flat key = value config file.")(fn)
    fn = click.option("--source", type=str, default=None, help="Labeled source CSV (f0..fD, error[, score]).")(fn)
    fn = click.option("--out-dir", type=str, default=None, help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("-k", "k", type=int, default=None, help="k-NN neighbor count.")(fn)
    fn = click.option("--fdp-max", type=float, default=None)(fn)
    fn = click.option("--alpha-source", type=float, default=None)(fn)
    fn = click.option("--alpha-prod", type=float, default=None)(fn)
    fn = click.option("--eps-tol", type=float, default=None)(fn)
    fn = click.option("--delta-corr", type=float, default=None)(fn)
    return fn


def _parse(config_file, **flags) -> AppConfig:
    try:
        return parse_config(config_file, **flags)
    except ConfigError as exc:
        _fail(exc)


@click.group()
def main():
    """Label-free sequential harmful-shift monitoring."""


@main.command("calibrate")
@_config_flags
def cmd_calibrate(config_file, **flags):
    """Calibrate the threshold pair and emit the grid report."""
    cfg = _parse(config_file, **flags)
    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        model, cal_scored, calres, r2 = _calibration_pipeline(cfg)
    except CalibrationInfeasible as exc:
        _fail(exc)
    except (IngestError, InvalidInput, ConfigError) as exc:
        _fail(exc)
    write_grid_report(os.path.join(cfg.out_dir, "grid_report.csv"), calres.grid_report)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "selector": {
            "q": calres.selector.q,
            "q_hat": calres.selector.q_hat,
            "p": calres.selector.p,
            "p_hat": calres.selector.p_hat,
        },
        "power": calres.power,
        "fdp": calres.fdp,
        "estimator_r2": r2,
        "estimator": "external_scores" if model is None else f"knn(k={model.k})",
        "grid_cells": len(calres.grid_report),
    }
    with open(os.path.join(cfg.out_dir, "selector.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
    click.echo(
        f"selector: q={calres.selector.q:.6g} q_hat={calres.selector.q_hat:.6g} "
        f"power={calres.power:.3f} fdp={calres.fdp:.3f} (r2={r2:.3f})"
    )


def _iter_production_rows(path):
    """Yield (features, score_or_None, error_or_None) one CSV row at a time."""
    fh = sys.stdin if path == "-" else open(path, newline="")
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError("production stream: missing header row")
        fcols = [c for c in reader.fieldnames if c.startswith("f") and c[1:].isdigit()]
        if not fcols:
            raise IngestError("production stream: no feature columns")
        for row in reader:
            feats = np.array([float(row[c]) for c in fcols])
            score = float(row["score"]) if "score" in row and row["score"] not in (None, "") else None
            error = float(row["error"]) if "error" in row and row["error"] not in (None, "") else None
            yield feats, score, error
    finally:
        if fh is not sys.stdin:
            fh.close()


@main.command("monitor")
@_config_flags
@click.option("--production", type=str, default=None, help="Production CSV path, or '-' for stdin (one event per line).")
def cmd_monitor(config_file, **flags):
    """Stream a production file (or stdin) through the quantile detectors.

    Exits 2 when an alarm latched; the trajectory is always written."""
    cfg = _parse(config_file, **flags)
    if cfg.production is None:
        _fail(ConfigError("production", "a production CSV (or '-') is required"))
    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        model, cal_scored, calres, r2 = _calibration_pipeline(cfg)
        mon_cfg = _monitor_config(cfg)
        stats = source_statistics(cal_scored, calres.selector, mon_cfg)
        state = MonitorState(calres.selector, stats, mon_cfg)
        for t, (feats, score, _err) in enumerate(_iter_production_rows(cfg.production), 1):
            if score is None:
                if model is None:
                    raise IngestError(
                        "production rows carry no 'score' column and no estimator "
                        "was fitted (source file had pre-computed scores)"
                    )
                score = predict(model, feats)
            state.observe(StreamEvent(t=t, features=tuple(feats)), score)
    except (CalibrationInfeasible, IngestError, InvalidInput, ConfigError) as exc:
        _fail(exc)
    write_trajectory_csv(os.path.join(cfg.out_dir, "trajectory.csv"), state.trajectory)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "events": state.t,
        "phi_q_alarm_time": state.phi_q_time,
        "phi_q2_alarm_time": state.phi_q2_time,
    }
    with open(os.path.join(cfg.out_dir, "monitor.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
    if state.phi_q or state.phi_q2:
        click.echo(
            f"ALARM: phi_q at t={state.phi_q_time}, phi_q2 at t={state.phi_q2_time}"
        )
        sys.exit(2)
    click.echo(f"no alarm over {state.t} events")


@main.command("simulate")
@_config_flags
@click.option("--schedule", "schedule", type=str, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--onset", type=int, default=None)
@click.option("--feature-kinds", "feature_kinds", type=str, default=None)
@click.option("--ablation-fraction", "ablation_fraction", type=float, default=None)
def cmd_simulate(config_file, **flags):
    """Enumerate feature-split scenarios and write replayable streams."""
    cfg = _parse(config_file, **flags)
    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        source = read_dataset(cfg.source) if cfg.source else None
        if source is None:
            raise ConfigError("source", "a source CSV is required")
        kinds = _feature_kinds(cfg, source.d)
        scenarios = enumerate_scenarios(
            source, kinds, cfg.ablation_fraction, base_seed=cfg.seed
        )
        schedule = _schedule(cfg)
        index = []
        for scenario in scenarios:
            retained, excluded = split_pools(source, scenario)
            stream = build_stream(retained, excluded, schedule, cfg.seed)
            path = os.path.join(cfg.out_dir, f"stream_{scenario.scenario_id}.csv")
            write_dataset(path, stream.to_dataset())
            index.append(
                {
                    "scenario_id": scenario.scenario_id,
                    "feature_index": scenario.feature_index,
                    "split_kind": scenario.split_kind,
                    "category_value": scenario.category_value,
                    "excluded_size": excluded.n,
                    "stream_file": os.path.basename(path),
                }
            )
    except (IngestError, InvalidInput, ConfigError) as exc:
        _fail(exc)
    with open(os.path.join(cfg.out_dir, "scenarios.json"), "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, "scenarios": index}, fh, sort_keys=True, indent=2)
    click.echo(f"wrote {len(index)} scenario streams to {cfg.out_dir}")


def _run_suite_from_config(cfg: AppConfig):
    source = read_dataset(cfg.source) if cfg.source else None
    if source is None:
        raise ConfigError("source", "a source CSV is required")
    kinds = _feature_kinds(cfg, source.d)
    scenarios = enumerate_scenarios(source, kinds, cfg.ablation_fraction, base_seed=cfg.seed)
    exp = ExperimentConfig(
        k=cfg.k,
        grid=_grid_spec(cfg),
        monitor=_monitor_config(cfg),
        horizon=cfg.horizon,
    )
    seeds = list(range(cfg.seed, cfg.seed + cfg.n_seeds))
    reports = run_suite(source, scenarios, _schedule(cfg), exp, seeds, workers=cfg.workers)
    return reports


@main.command("evaluate")
@_config_flags
@click.option("--schedule", "schedule", type=str, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--onset", type=int, default=None)
@click.option("--feature-kinds", "feature_kinds", type=str, default=None)
@click.option("--n-seeds", "n_seeds", type=int, default=None)
@click.option("--workers", type=int, default=None)
def cmd_evaluate(config_file, **flags):
    """Run the full shift suite and emit per-detector metrics JSON."""
    cfg = _parse(config_file, **flags)
    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        reports = _run_suite_from_config(cfg)
        payload = {
            "schema_version": SCHEMA_VERSION,
            "n_runs": len(reports),
            "n_uncalibratable": sum(r.uncalibratable for r in reports),
            "detectors": {
                det: suite_metrics(reports, det, eps_harm=0.0).to_dict()
                for det in ("phi_q", "phi_q2", "mean")
            },
            "by_r2_decile": {
                det: suite_metrics_by_r2(reports, det, eps_harm=0.0)
                for det in ("phi_q2", "mean")
            },
        }
    except (IngestError, InvalidInput, ConfigError) as exc:
        _fail(exc)
    with open(os.path.join(cfg.out_dir, "metrics.json"), "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
    with open(os.path.join(cfg.out_dir, "runs.json"), "w") as fh:
        fh.write(reports_to_json(reports))
    click.echo(json.dumps(payload["detectors"], sort_keys=True))


@main.command("sweep")
@_config_flags
@click.option("--schedule", "schedule", type=str, default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--onset", type=int, default=None)
@click.option("--feature-kinds", "feature_kinds", type=str, default=None)
@click.option("--n-seeds", "n_seeds", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--eps-harm-grid", "eps_harm_grid", type=str, default=None, help="Comma-separated harmfulness thresholds.")
@click.option("--eps-tol-grid", "eps_tol_grid", type=str, default=None, help="Comma-separated detector tolerances.")
def cmd_sweep(config_file, **flags):
    """Sweep harmfulness-threshold and tolerance grids over one suite run."""
    cfg = _parse(config_file, **flags)
    os.makedirs(cfg.out_dir, exist_ok=True)
    try:
        reports = _run_suite_from_config(cfg)
        rows = []
        for eps_tol in cfg.eps_tol_grid:
            for eps_harm in cfg.eps_harm_grid:
                for det in ("phi_q", "phi_q2", "mean"):
                    m = suite_metrics(reports, det, eps_harm=eps_harm, eps_tol=eps_tol)
                    rows.append({"eps_tol": eps_tol, **m.to_dict()})
    except (IngestError, InvalidInput, ConfigError) as exc:
        _fail(exc)
    payload = {"schema_version": SCHEMA_VERSION, "sweep": rows}
    with open(os.path.join(cfg.out_dir, "sweep.json"), "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
    with open(os.path.join(cfg.out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=sorted(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} sweep rows to {cfg.out_dir}")


@main.command("backend")
def cmd_backend():
    """Report which PM-EB kernel backend is active."""
    click.echo(confidence.BACKEND)


if __name__ == "__main__":
    main()
