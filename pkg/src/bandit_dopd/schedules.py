"""Step-size, regularization, shrinkage, exploration and trigger schedules.

Two schedule families are provided. Both use ``xi_t = 1/(t+1)`` and
``delta_t = r/(t+1)`` where ``r`` is the inner radius of the decision set.

* :class:`Theorem1` couples the primal step to the trigger thresholds:
  ``alpha_t = sqrt(Psi_t / t)`` with ``Psi_t = tau_1 + ... + tau_t``,
  ``beta_t = t^-kappa``, ``gamma_t = t^(kappa-1)``.
* :class:`Theorem2` decouples them: ``alpha_t = alpha0 / t^theta1``,
  ``beta_t = t^-theta2``, ``gamma_t = t^(theta2-1)`` and
  ``tau_t = tau0 / t^theta3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

from bandit_dopd.exceptions import ParameterError


# -- trigger thresholds ------------------------------------------------------


@dataclass(frozen=True)
class Power:
    """``tau_t = 1 / t^theta``."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ParameterError(f"power trigger needs theta > 0, got {self.theta!r}")

    def tau(self, t: int) -> float:
        return t ** -self.theta


@dataclass(frozen=True)
class Geometric:
    """``tau_t = 1 / c^t``."""

    c: float

    def __post_init__(self):
        if not self.c > 1:
            raise ParameterError(f"geometric trigger needs c > 1, got {self.c!r}")

    def tau(self, t: int) -> float:
        # Underflows to 0.0 for large t, which is the correct limit.
        return math.exp(-t * math.log(self.c))


@dataclass(frozen=True)
class ScaledPower:
    """``tau_t = tau0 / t^theta3``."""

    tau0: float
    theta3: float

    def __post_init__(self):
        if not self.tau0 >= 0:
            raise ParameterError(f"tau0 must be nonnegative, got {self.tau0!r}")
        if not self.theta3 > 0:
            raise ParameterError(f"theta3 must be positive, got {self.theta3!r}")

    def tau(self, t: int) -> float:
        return self.tau0 * t ** -self.theta3


@dataclass(frozen=True)
class NoTrigger:
    """Broadcast every round: ``tau_1 = 1`` and ``tau_t = 0`` afterwards."""

    def tau(self, t: int) -> float:
        return 1.0 if t == 1 else 0.0


TriggerSchedule = Union[Power, Geometric, ScaledPower, NoTrigger]


# -- full schedules ----------------------------------------------------------


@dataclass(frozen=True)
class ParamsAt:
    t: int
    alpha: float
    beta: float
    gamma: float
    xi: float
    delta: float
    tau: float
    psi: float


def _check_unit_open(name: str, value: float) -> None:
    if not (0.0 < value < 1.0):
        raise ParameterError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class Theorem1:
    kappa: float
    trigger: TriggerSchedule
    r: float

    def __post_init__(self):
        _check_unit_open("kappa", self.kappa)
        if not self.trigger.tau(1) > 0:
            raise ParameterError("Theorem-1 steps need tau_1 > 0, otherwise alpha_t is identically zero")
        if not self.r > 0:
            raise ParameterError(f"inner radius must be positive, got {self.r!r}")

    def _make(self, t: int, psi: float) -> ParamsAt:
        return ParamsAt(
            t=t,
            alpha=math.sqrt(psi / t),
            beta=t ** -self.kappa,
            gamma=t ** (self.kappa - 1.0),
            xi=1.0 / (t + 1),
            delta=self.r / (t + 1),
            tau=self.trigger.tau(t),
            psi=psi,
        )


@dataclass(frozen=True)
class Theorem2:
    alpha0: float
    theta1: float
    theta2: float
    trigger: TriggerSchedule
    r: float

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ParameterError(f"alpha0 must be positive, got {self.alpha0!r}")
        _check_unit_open("theta1", self.theta1)
        _check_unit_open("theta2", self.theta2)
        if not self.r > 0:
            raise ParameterError(f"inner radius must be positive, got {self.r!r}")

    def _make(self, t: int, psi: float) -> ParamsAt:
        return ParamsAt(
            t=t,
            alpha=self.alpha0 * t ** -self.theta1,
            beta=t ** -self.theta2,
            gamma=t ** (self.theta2 - 1.0),
            xi=1.0 / (t + 1),
            delta=self.r / (t + 1),
            tau=self.trigger.tau(t),
            psi=psi,
        )


Schedule = Union[Theorem1, Theorem2]


def theorem2(alpha0: float, theta1: float, theta2: float, theta3: float, tau0: float, r: float) -> Theorem2:
    """Theorem-2 schedule with its scaled-power trigger ``tau0 / t^theta3``."""
    return Theorem2(alpha0, theta1, theta2, ScaledPower(tau0, theta3), r)


def paper_sec4(tau0: float, r: float) -> Theorem2:
    """``alpha_t = beta_t = gamma_t = 1/sqrt(t)`` and ``tau_t = tau0 / t``."""
    return theorem2(1.0, 0.5, 0.5, 1.0, tau0, r)


def params_at(schedule: Schedule, t: int) -> ParamsAt:
    """Parameters for round ``t >= 1``; recomputes ``Psi_t`` in O(t)."""
    if int(t) != t or t < 1:
        raise ParameterError(f"rounds are numbered from 1, got t={t!r}")
    t = int(t)
    # Same left-to-right order as iter_params, so both paths agree bitwise.
    psi = 0.0
    for k in range(1, t + 1):
        psi += schedule.trigger.tau(k)
    return schedule._make(t, psi)


def iter_params(schedule: Schedule, start: int = 1) -> Iterator[ParamsAt]:
    """Sequential parameters ``t = start, start+1, ...`` with incremental ``Psi``."""
    psi = params_at(schedule, start - 1).psi if start > 1 else 0.0
    t = start
    while True:
        psi += schedule.trigger.tau(t)
        yield schedule._make(t, psi)
        t += 1


class ParamTable:
    """Write-once memo of :class:`ParamsAt` for rounds ``1..T``."""

    def __init__(self, schedule: Schedule, T: int):
        it = iter_params(schedule)
        self._rows = [next(it) for _ in range(T)]

    def __getitem__(self, t: int) -> ParamsAt:
        if t < 1:
            raise ParameterError(f"rounds are numbered from 1, got t={t!r}")
        return self._rows[t - 1]

    def __len__(self) -> int:
        return len(self._rows)
