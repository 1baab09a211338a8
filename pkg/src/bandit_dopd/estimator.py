"""Two-point stochastic subgradient estimators.

With a direction ``u`` on the unit sphere and exploration radius ``delta``::

    loss:        (p / delta) * (f(x + delta u) - f(x)) * u
    constraint:  (p / delta) * u (x) ([g(x + delta u)]_+ - [g(x)]_+)^T

The constraint estimate is a ``(p, m)`` matrix. Both functions broadcast over
leading agent axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bandit_dopd.exceptions import ParameterError
from bandit_dopd.geometry import sample_unit_ball


@dataclass(frozen=True)
class BanditSample:
    """Everything one agent observes in one round."""

    u: np.ndarray
    delta: float
    f_at_x: float
    f_at_xplus: float
    gplus_at_x: np.ndarray
    gplus_at_xplus: np.ndarray

    def loss_subgrad(self) -> np.ndarray:
        return est_loss_subgrad(self.f_at_x, self.f_at_xplus, self.u, self.delta)

    def constraint_plus_subgrad(self) -> np.ndarray:
        return est_constraint_plus_subgrad(self.gplus_at_x, self.gplus_at_xplus, self.u, self.delta)


def _check_delta(delta: float) -> None:
    if not delta > 0:
        raise ParameterError(f"exploration radius must be positive, got {delta!r}")


def est_loss_subgrad(f_at_x, f_at_xplus, u, delta: float) -> np.ndarray:
    _check_delta(delta)
    u = np.asarray(u, dtype=float)
    p = u.shape[-1]
    diff = np.asarray(f_at_xplus, dtype=float) - np.asarray(f_at_x, dtype=float)
    return (p / delta) * diff[..., None] * u


def est_constraint_plus_subgrad(gplus_at_x, gplus_at_xplus, u, delta: float) -> np.ndarray:
    _check_delta(delta)
    u = np.asarray(u, dtype=float)
    p = u.shape[-1]
    diff = np.asarray(gplus_at_xplus, dtype=float) - np.asarray(gplus_at_x, dtype=float)
    return (p / delta) * u[..., :, None] * diff[..., None, :]


def smoothed_value(oracle, x, delta: float, n_samples: int, rng: np.random.Generator,
                   return_stderr: bool = False):
    """Monte Carlo estimate of ``E_v[oracle(x + delta v)]``, ``v`` uniform in the unit ball.

    ``oracle`` must accept a batch of points of shape ``(k, p)`` and return
    ``k`` values.
    """
    x = np.asarray(x, dtype=float)
    v = sample_unit_ball(rng, x.shape[-1], n_samples)
    vals = np.asarray(oracle(x + delta * v), dtype=float)
    mean = float(vals.mean())
    if return_stderr:
        return mean, float(vals.std(ddof=1) / np.sqrt(n_samples))
    return mean
