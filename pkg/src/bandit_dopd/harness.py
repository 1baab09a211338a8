"""Experiment orchestration: single runs, parameter sweeps and sweep aggregation.

A run directory holds ``metrics.csv`` and ``summary.json``. A sweep directory
holds one run directory per (value, seed) pair, laid out as
``<param>=<value>/seed=<seed>/``, plus ``aggregate.csv`` computed from the
per-run CSVs alone.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from bandit_dopd.algorithm import run_horizon
from bandit_dopd.comparators import solve_dynamic_comparator, solve_static_comparator
from bandit_dopd.config import RunConfig
from bandit_dopd.exceptions import ConfigError
from bandit_dopd.metrics import MetricsLog, emit_csv, read_csv, write_summary
from bandit_dopd.problem import ProblemBounds, estimate_bounds

log = logging.getLogger(__name__)

THREADS_ENV = "BANDIT_DOPD_THREADS"

# sweep parameter name -> RunConfig attribute
SWEEP_PARAMS = {
    "tau0": "trigger_tau0",
    "theta": "trigger_theta",
    "c": "trigger_c",
    "kappa": "schedule_kappa",
}

AGGREGATE_HEADER = (
    "param",
    "value",
    "runs",
    "mean_final_avg_cum_loss",
    "mean_final_avg_cum_loss_per_t",
    "mean_final_avg_cum_ccv",
    "mean_final_avg_cum_ccv_per_t",
    "mean_total_triggers",
)

BOUNDS_EVERY = 100


def bounds_for(config: RunConfig) -> ProblemBounds:
    """Sampled problem constants for a config, estimated on every 100th round."""
    rounds = range(1, config.T + 1, BOUNDS_EVERY)
    return estimate_bounds(config.build_family(), config.build_set(), rounds, seed=config.seed)


def simulate(config: RunConfig) -> MetricsLog:
    """Run the algorithm (and any requested comparators) without writing files."""
    fset = config.build_set()
    family = config.build_family()
    bounds = bounds_for(config) if config.debug_invariants else None
    result = run_horizon(
        config.T,
        family,
        fset,
        config.build_schedule(),
        config.build_graphs(),
        mode=config.mode,
        seed=config.seed,
        init_rule=config.init,
        debug_invariants=config.debug_invariants,
        dual_bound=None if bounds is None else bounds.dual_bound,
        grad_bound=None if bounds is None else config.p * bounds.F2,
    )
    if config.compute_static_comparator:
        result.static_comparator = solve_static_comparator(family, fset, T=config.T)
    if config.compute_dynamic_comparator:
        result.dynamic_comparator = solve_dynamic_comparator(family, fset, T=config.T)
    result.seed = config.seed
    result.config_hash = config.hash()
    return result


def run_experiment(config: RunConfig, out: Optional[os.PathLike] = None) -> MetricsLog:
    """Run one experiment and write ``metrics.csv`` and ``summary.json``.

    Parameters
    ----------
    config : RunConfig
        Validated run configuration.
    out : path-like, optional
        Output directory; defaults to ``config.out``.

    Returns
    -------
    MetricsLog
        The in-memory log that was written.

    Raises
    ------
    ConnectivityError
        If a window of communication graphs is not strongly connected.
    InvariantViolation
        If ``debug_invariants`` is set and an invariant check fails.
    OSError
        If the output directory cannot be written.
    """
    out_dir = Path(config.out if out is None else out)
    start = time.perf_counter()
    result = simulate(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_csv(result, out_dir / "metrics.csv")
    write_summary(result, out_dir / "summary.json", config.as_dict())
    log.info("run seed=%d T=%d finished in %.2fs -> %s", config.seed, config.T, time.perf_counter() - start, out_dir)
    return result


def worker_count(requested: Optional[int], jobs: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if requested is not None:
        cap = min(cap, max(1, requested))
    return max(1, min(cap, jobs))


def _value_label(value: float) -> str:
    return format(float(value), "g")


def _run_job(args) -> str:
    config, out_dir = args
    run_experiment(config, out_dir)
    return str(out_dir)


def sweep(config: RunConfig, param: str, values: Sequence[float], seeds: Sequence[int], out=None,
          workers: Optional[int] = None) -> Path:
    """Run ``config`` for every ``(value, seed)`` pair and write ``aggregate.csv``.

    Runs execute in separate processes, at most ``BANDIT_DOPD_THREADS`` at a
    time when that variable is set. Returns the sweep directory.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}, got {param!r}")
    if not values or not seeds:
        raise ConfigError("sweep needs at least one value and one seed")
    root = Path(config.out if out is None else out)
    attr = SWEEP_PARAMS[param]
    jobs = []
    for value in values:
        for seed in seeds:
            cfg = config.replace(**{attr: float(value), "seed": int(seed)})
            jobs.append((cfg, root / f"{param}={_value_label(value)}" / f"seed={int(seed)}"))

    n_workers = worker_count(workers, len(jobs))
    if n_workers == 1:
        for job in jobs:
            _run_job(job)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(_run_job, jobs))
    aggregate_sweep(root, param, values)
    return root


def aggregate_sweep(root, param: str, values: Optional[Iterable[float]] = None) -> Path:
    """Write ``aggregate.csv`` from the per-run metrics CSVs under ``root``.

    When ``values`` is omitted, every ``<param>=<value>`` directory is used,
    ordered numerically.
    """
    root = Path(root)
    if values is None:
        labels = sorted((d.name.split("=", 1)[1] for d in root.glob(f"{param}=*") if d.is_dir()), key=float)
    else:
        labels = [_value_label(v) for v in values]
    rows = []
    for label in labels:
        finals = []
        for csv_path in sorted((root / f"{param}={label}").glob("seed=*/metrics.csv")):
            cols = read_csv(csv_path)
            finals.append([
                cols["avg_cum_loss"][-1],
                cols["avg_cum_loss_per_t"][-1],
                cols["avg_cum_ccv"][-1],
                cols["avg_cum_ccv_per_t"][-1],
                cols["cum_triggers"][-1],
            ])
        if not finals:
            raise FileNotFoundError(f"no runs found for {param}={label} under {root}")
        means = np.mean(finals, axis=0)
        rows.append([param, label, len(finals), *(format(v, ".17g") for v in means)])
    path = root / "aggregate.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        w.writerows(rows)
    return path


def read_aggregate(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["value"] = float(r["value"])
        r["runs"] = int(r["runs"])
        for key in AGGREGATE_HEADER[3:]:
            r[key] = float(r[key])
    return rows
