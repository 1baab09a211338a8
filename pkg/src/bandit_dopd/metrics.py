"""Network regret, cumulative constraint violation and run telemetry.

Every decision ``x_{i,t}`` is charged the *global* loss
``f_t(x) = mean_j f_{j,t}(x)`` and the norm of the clipped stacked constraint
``[g_t(x)]_+``. Evaluating these needs every agent's oracle at every agent's
decision, which the simulator can do but no agent could.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

CSV_HEADER = (
    "t",
    "avg_cum_loss",
    "avg_cum_loss_per_t",
    "avg_cum_ccv",
    "avg_cum_ccv_per_t",
    "cum_triggers",
    "regret_static",
    "regret_dynamic",
)


def evaluate_decisions(rp, X) -> tuple[np.ndarray, np.ndarray]:
    """Global loss and clipped-violation norm at each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    loss = rp.global_loss(X)
    violation = np.linalg.norm(np.maximum(rp.global_constraint(X), 0.0), axis=1)
    return loss, violation


@dataclass
class ComparatorSequence:
    """Comparator decisions ``y`` (``(T, p)``) with their global losses ``f_t(y_t)``."""

    y: np.ndarray
    losses: np.ndarray
    kind: str  # "static" or "dynamic"
    max_violation: float = 0.0
    converged: bool = True

    def __len__(self) -> int:
        return self.y.shape[0]


@dataclass
class MetricsLog:
    """Per-round, per-agent loss and violation plus trigger counts.

    ``loss[t-1, i] = f_t(x_{i,t})`` and ``violation[t-1, i] = ||[g_t(x_{i,t})]_+||``.
    ``triggers[t-1]`` is the number of broadcasts of round-``t`` decisions.
    """

    n: int
    loss: np.ndarray
    violation: np.ndarray
    triggers: np.ndarray
    decisions: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
    static_comparator: Optional[ComparatorSequence] = None
    dynamic_comparator: Optional[ComparatorSequence] = None
    seed: Optional[int] = None
    config_hash: Optional[str] = None

    @property
    def T(self) -> int:
        return self.loss.shape[0]

    @property
    def avg_cum_loss(self) -> np.ndarray:
        return np.cumsum(self.loss.sum(axis=1)) / self.n

    @property
    def avg_cum_ccv(self) -> np.ndarray:
        return np.cumsum(self.violation.sum(axis=1)) / self.n

    @property
    def cum_triggers(self) -> np.ndarray:
        return np.cumsum(self.triggers)

    def regret_series(self, comparator: ComparatorSequence) -> np.ndarray:
        if len(comparator) < self.T:
            raise ValueError(f"comparator covers {len(comparator)} rounds, log has {self.T}")
        return self.avg_cum_loss - np.cumsum(comparator.losses[: self.T])


def from_decisions(family, decisions) -> MetricsLog:
    """Build a log from explicit decisions ``(T, n, p)``; triggers are left at zero."""
    decisions = np.asarray(decisions, dtype=float)
    T, n, _ = decisions.shape
    loss = np.empty((T, n))
    violation = np.empty((T, n))
    for t in range(1, T + 1):
        loss[t - 1], violation[t - 1] = evaluate_decisions(family.round(t), decisions[t - 1])
    return MetricsLog(n=n, loss=loss, violation=violation, triggers=np.zeros(T, dtype=np.int64),
                      decisions=decisions)


def network_regret(log: MetricsLog, comparator: ComparatorSequence, T: Optional[int] = None) -> float:
    """``(1/n) sum_i sum_t f_t(x_{i,t}) - sum_t f_t(y_t)`` over the first ``T`` rounds."""
    T = log.T if T is None else T
    if T > log.T:
        raise ValueError(f"log covers {log.T} rounds, asked for {T}")
    if len(comparator) < T:
        raise ValueError(f"comparator covers {len(comparator)} rounds, need {T}")
    return float(log.loss[:T].sum() / log.n - comparator.losses[:T].sum())


def network_ccv(log: MetricsLog, T: Optional[int] = None) -> float:
    """``(1/n) sum_i sum_t ||[g_t(x_{i,t})]_+||`` over the first ``T`` rounds."""
    T = log.T if T is None else T
    if T > log.T:
        raise ValueError(f"log covers {log.T} rounds, asked for {T}")
    return float(log.violation[:T].sum() / log.n)


def path_length(comparator) -> float:
    """Total variation ``sum_t ||y_{t+1} - y_t||`` of a comparator sequence."""
    y = comparator.y if isinstance(comparator, ComparatorSequence) else np.asarray(comparator, dtype=float)
    if y.shape[0] < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(y, axis=0), axis=1).sum())


def _fmt(value) -> str:
    return format(float(value), ".17g")


def emit_csv(log: MetricsLog, path) -> Path:
    """Write one row per round with the columns of :data:`CSV_HEADER`."""
    path = Path(path)
    t = np.arange(1, log.T + 1)
    loss = log.avg_cum_loss
    ccv = log.avg_cum_ccv
    trig = log.cum_triggers
    static = log.regret_series(log.static_comparator) if log.static_comparator is not None else None
    dynamic = log.regret_series(log.dynamic_comparator) if log.dynamic_comparator is not None else None
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(log.T):
            w.writerow([
                int(t[k]),
                _fmt(loss[k]),
                _fmt(loss[k] / t[k]),
                _fmt(ccv[k]),
                _fmt(ccv[k] / t[k]),
                int(trig[k]),
                "" if static is None else _fmt(static[k]),
                "" if dynamic is None else _fmt(dynamic[k]),
            ])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a metrics CSV back into columns; empty cells become NaN."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        key: np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])
        for key in CSV_HEADER
    }


def summary(log: MetricsLog, config: Optional[dict] = None) -> dict:
    out = {
        "seed": log.seed,
        "config_hash": log.config_hash,
        "T": log.T,
        "n": log.n,
        "final_avg_cum_loss": float(log.avg_cum_loss[-1]),
        "final_avg_loss_per_t": float(log.avg_cum_loss[-1] / log.T),
        "final_ccv": float(log.avg_cum_ccv[-1]),
        "final_ccv_per_t": float(log.avg_cum_ccv[-1] / log.T),
        "total_triggers": int(log.cum_triggers[-1]),
        "regret_static": None,
        "regret_dynamic": None,
        "path_length_dynamic": None,
    }
    if log.static_comparator is not None:
        out["regret_static"] = network_regret(log, log.static_comparator)
    if log.dynamic_comparator is not None:
        out["regret_dynamic"] = network_regret(log, log.dynamic_comparator)
        out["path_length_dynamic"] = path_length(log.dynamic_comparator)
    if config is not None:
        out["config"] = config
    return out


def write_summary(log: MetricsLog, path, config: Optional[dict] = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary(log, config), indent=2, sort_keys=True) + "\n")
    return path
