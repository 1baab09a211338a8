"""Distributed event-triggered online primal-dual algorithm.

Each agent ``i`` keeps a decision ``x_i``, the copy ``x_hat_i`` it last
broadcast, a consensus estimate ``z_i`` and a nonnegative dual vector ``q_i``.
One round ``t`` of the algorithm, for every agent in parallel:

1. draw a direction ``u_i`` on the unit sphere and observe ``f_i``, ``[g_i]_+``
   at ``x_i`` and at the probe ``x_i + delta_t u_i`` (bandit mode), or the
   analytic subgradients (full-information mode);
2. consensus: ``z_i <- sum_j W_t[i, j] x_hat_j``;
3. primal-dual update with the round ``t+1`` parameters;
4. broadcast ``x_i`` (setting ``x_hat_i = x_i``) only if it moved at least
   ``tau_{t+1}`` away from the last broadcast.

Agents are updated as rows of stacked arrays. Each agent's randomness comes
from its own ``(seed, agent, round)`` stream, so results do not depend on
evaluation order; :func:`run_round` can also update agents one at a time in
any order for checking that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from bandit_dopd import rng as rngmod
from bandit_dopd.estimator import est_constraint_plus_subgrad, est_loss_subgrad
from bandit_dopd.exceptions import InvariantViolation, ParameterError
from bandit_dopd.geometry import FeasibleSet, sample_unit_sphere
from bandit_dopd.metrics import MetricsLog, evaluate_decisions
from bandit_dopd.schedules import ParamsAt, ParamTable, Schedule, params_at

MODES = ("bandit", "full_info")
INIT_RULES = ("zero", "uniform")


@dataclass
class AgentState:
    x: np.ndarray
    x_hat: np.ndarray
    z: np.ndarray
    q: np.ndarray


@dataclass
class NetworkState:
    """All agents' states stacked row-wise: ``x``, ``x_hat``, ``z`` are ``(n, p)``, ``q`` is ``(n, m)``."""

    x: np.ndarray
    x_hat: np.ndarray
    z: np.ndarray
    q: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def agent(self, i: int) -> AgentState:
        return AgentState(self.x[i].copy(), self.x_hat[i].copy(), self.z[i].copy(), self.q[i].copy())

    def copy(self) -> "NetworkState":
        return NetworkState(self.x.copy(), self.x_hat.copy(), self.z.copy(), self.q.copy())


@dataclass
class RoundOutput:
    """What happened in round ``t``.

    ``x`` are the round-``t`` decisions, ``broadcast[i]`` tells whether agent
    ``i`` broadcast its round-``t+1`` decision, ``u`` holds the directions
    (``None`` in full-information mode) and ``est_f`` the loss subgradient
    estimates (or exact subgradients in full-information mode).
    """

    t: int
    x: np.ndarray
    own_loss: np.ndarray
    gplus: np.ndarray
    broadcast: np.ndarray
    u: Optional[np.ndarray]
    est_f: Optional[np.ndarray] = None


def init_agents(n: int, fset: FeasibleSet, schedule: Schedule, m: int, init_rule: str = "zero",
                seed: int = 0) -> NetworkState:
    """Initial states with ``x_1`` in ``(1 - xi_1) X``, ``x_hat_1 = x_1`` and ``q_1 = 0``.

    The round-1 broadcast of ``x_hat_1`` is implicit: every agent's copy is
    visible from the start and it is counted as ``n`` triggers.
    """
    xi1 = params_at(schedule, 1).xi
    if init_rule == "zero":
        x = np.zeros((n, fset.dim))
    elif init_rule == "uniform":
        x = np.array([fset.sample(rngmod.stream(seed, rngmod.INIT, i), shrink=1 - xi1) for i in range(n)])
    else:
        raise ParameterError(f"unknown init rule {init_rule!r}; expected one of {INIT_RULES}")
    return NetworkState(x=x, x_hat=x.copy(), z=x.copy(), q=np.zeros((n, m)))


def consensus_step(x_hat: np.ndarray, W: np.ndarray, i: Optional[int] = None) -> np.ndarray:
    """Weighted average of the stored broadcasts, for agent ``i`` or all agents."""
    if i is None:
        return W @ x_hat
    return W[i] @ x_hat


def primal_dual_step(x, z_next, q, est_f, est_g, gplus_at_x, params: ParamsAt, fset: FeasibleSet):
    """One primal-dual update; ``params`` are the round ``t+1`` parameters.

    Works on a single agent (``x`` of shape ``(p,)``, ``est_g`` of shape
    ``(p, m)``) or on stacked agents (leading axis ``n``).
    """
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    est_g = np.asarray(est_g, dtype=float)
    if est_g.shape[-2:] != (x.shape[-1], q.shape[-1]):
        raise ValueError(f"constraint estimate has shape {est_g.shape}, expected (..., {x.shape[-1]}, {q.shape[-1]})")
    omega = est_f + np.einsum("...pm,...m->...p", est_g, q)
    x_next = fset.project(z_next - params.alpha * omega, shrink=1.0 - params.xi)
    b_hat = gplus_at_x + np.einsum("...pm,...p->...m", est_g, x_next - x)
    q_next = np.maximum((1.0 - params.beta * params.gamma) * q + params.gamma * b_hat, 0.0)
    return x_next, q_next


def event_trigger(x_hat, x_new, tau_next: float):
    """Return ``(x_hat_new, broadcast)``; broadcast iff ``||x_new - x_hat|| >= tau_next``."""
    if tau_next < 0:
        raise ParameterError(f"trigger threshold must be nonnegative, got {tau_next!r}")
    x_hat = np.asarray(x_hat, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    fire = np.linalg.norm(x_new - x_hat, axis=-1) >= tau_next
    return np.where(fire[..., None], x_new, x_hat), fire


def _directions(seed: int, t: int, n: int, p: int) -> np.ndarray:
    return np.array([sample_unit_sphere(rngmod.stream(seed, rngmod.DIRECTION, i, t), p) for i in range(n)])


def _observe(rp, state: NetworkState, U, params: ParamsAt, mode: str):
    """Return ``(own_loss, gplus_at_x, est_f, est_g)`` for all agents."""
    X = state.x
    own_loss = rp.loss_all(X)
    gplus = np.maximum(rp.constraint_all(X), 0.0)
    if mode == "bandit":
        probe = X + params.delta * U
        f_probe = rp.loss_all(probe)
        g_probe = np.maximum(rp.constraint_all(probe), 0.0)
        est_f = est_loss_subgrad(own_loss, f_probe, U, params.delta)
        est_g = est_constraint_plus_subgrad(gplus, g_probe, U, params.delta)
    elif mode == "full_info":
        est_f = rp.loss_subgrad_all(X)
        est_g = rp.constraint_plus_subgrad_all(X)
    else:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    return own_loss, gplus, est_f, est_g


def _observe_agent(rp, i: int, x, u, params: ParamsAt, mode: str):
    f_x = rp.loss(i, x)
    gplus = np.maximum(rp.constraint(i, x), 0.0)
    if mode == "bandit":
        probe = x + params.delta * u
        est_f = est_loss_subgrad(f_x, rp.loss(i, probe), u, params.delta)
        est_g = est_constraint_plus_subgrad(gplus, np.maximum(rp.constraint(i, probe), 0.0), u, params.delta)
    elif mode == "full_info":
        est_f = rp.loss_subgrad(i, x)
        est_g = rp.constraint_plus_subgrad(i, x)
    else:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    return f_x, gplus, est_f, est_g


def run_round(t: int, state: NetworkState, rp, W: np.ndarray, params: ParamsAt, params_next: ParamsAt,
              fset: FeasibleSet, mode: str = "bandit", seed: int = 0,
              agent_order: Optional[Sequence[int]] = None) -> tuple[NetworkState, RoundOutput]:
    """Advance every agent from round ``t`` to ``t+1``.

    ``state`` is read-only; a new state is returned. With ``agent_order`` the
    agents are updated one by one in that order instead of as one batch.
    """
    n, p = state.x.shape
    U = _directions(seed, t, n, p) if mode == "bandit" else None
    if agent_order is None:
        own_loss, gplus, EF, est_g = _observe(rp, state, U, params, mode)
        Z = consensus_step(state.x_hat, W)
        X_next, Q_next = primal_dual_step(state.x, Z, state.q, EF, est_g, gplus, params_next, fset)
        Xhat_next, fire = event_trigger(state.x_hat, X_next, params_next.tau)
    else:
        if sorted(agent_order) != list(range(n)):
            raise ValueError("agent_order must be a permutation of range(n)")
        own_loss = np.empty(n)
        gplus = np.empty_like(state.q)
        Z = np.empty_like(state.x)
        X_next, Q_next, Xhat_next = np.empty_like(state.x), np.empty_like(state.q), np.empty_like(state.x)
        fire = np.empty(n, dtype=bool)
        EF = np.empty_like(state.x)
        for i in agent_order:
            u = None if U is None else U[i]
            own_loss[i], gplus[i], EF[i], est_g = _observe_agent(rp, i, state.x[i], u, params, mode)
            Z[i] = consensus_step(state.x_hat, W, i)
            X_next[i], Q_next[i] = primal_dual_step(state.x[i], Z[i], state.q[i], EF[i], est_g, gplus[i],
                                                    params_next, fset)
            Xhat_next[i], fire[i] = event_trigger(state.x_hat[i], X_next[i], params_next.tau)
    new_state = NetworkState(x=X_next, x_hat=Xhat_next, z=Z, q=Q_next)
    out = RoundOutput(t=t, x=state.x, own_loss=own_loss, gplus=gplus, broadcast=fire, u=U, est_f=EF)
    return new_state, out


class _Diagnostics:
    """Per-round invariant measurements; raises on breach when ``strict``."""

    def __init__(self, T: int, strict: bool, fset: FeasibleSet, dual_bound: Optional[float],
                 grad_bound: Optional[float] = None):
        self.strict = strict
        self.fset = fset
        self.dual_bound = dual_bound
        self.grad_bound = grad_bound
        self.max_est_norm = np.full(T, np.nan)  # max_i ||loss subgradient estimate||
        self.trigger_gap = np.full(T, np.nan)   # max_i ||x_hat - x|| - tau_t
        self.min_dual = np.full(T, np.nan)
        self.max_scaled_dual = np.full(T, np.nan)  # max_i ||beta_t q_i||
        self.decision_ok = np.zeros(T, dtype=bool)
        self.probe_ok = np.ones(T, dtype=bool)
        self.checks = 0

    def record(self, t: int, state: NetworkState, params: ParamsAt, U: Optional[np.ndarray],
               est_f: Optional[np.ndarray] = None) -> None:
        k = t - 1
        self.trigger_gap[k] = np.max(np.linalg.norm(state.x_hat - state.x, axis=1)) - params.tau
        self.min_dual[k] = np.min(state.q) if state.q.size else 0.0
        self.max_scaled_dual[k] = np.max(np.linalg.norm(params.beta * state.q, axis=1))
        self.decision_ok[k] = bool(np.all(self.fset.contains(state.x, shrink=1.0 - params.xi)))
        if U is not None:
            self.probe_ok[k] = bool(np.all(self.fset.contains(state.x + params.delta * U)))
        if est_f is not None:
            self.max_est_norm[k] = np.max(np.linalg.norm(est_f, axis=1))
        self.checks += 1
        if self.strict:
            self._assert(t)

    def _assert(self, t: int) -> None:
        k = t - 1
        problems = []
        if self.trigger_gap[k] > 0:
            problems.append(f"||x_hat - x|| exceeds tau by {self.trigger_gap[k]:.3g}")
        if self.min_dual[k] < 0:
            problems.append(f"negative dual entry {self.min_dual[k]:.3g}")
        if self.dual_bound is not None and self.max_scaled_dual[k] > self.dual_bound:
            problems.append(f"||beta q|| = {self.max_scaled_dual[k]:.6g} exceeds {self.dual_bound:.6g}")
        if self.grad_bound is not None and self.max_est_norm[k] > self.grad_bound:
            problems.append(f"||loss estimate|| = {self.max_est_norm[k]:.6g} exceeds {self.grad_bound:.6g}")
        if not self.decision_ok[k]:
            problems.append("decision outside the shrunken set")
        if not self.probe_ok[k]:
            problems.append("probe point outside the decision set")
        if problems:
            raise InvariantViolation(f"round {t}: " + "; ".join(problems))

    def as_dict(self) -> dict:
        return {
            "trigger_gap": self.trigger_gap,
            "min_dual": self.min_dual,
            "max_scaled_dual": self.max_scaled_dual,
            "decision_ok": self.decision_ok,
            "probe_ok": self.probe_ok,
            "max_est_norm": self.max_est_norm,
        }


def run_horizon(T: int, family, fset: FeasibleSet, schedule: Schedule, graphs, mode: str = "bandit",
                seed: int = 0, init_rule: str = "zero", debug_invariants: bool = False,
                dual_bound: Optional[float] = None, record_decisions: bool = False,
                grad_bound: Optional[float] = None) -> MetricsLog:
    """Run rounds ``1..T`` and return the per-round metrics.

    ``family.round(t)`` supplies round problems and ``graphs.mixing(t)`` the
    mixing matrices. The loop updates decisions for ``t = 1..T-1``; every one of
    the ``T`` decision rounds is charged in the metrics.

    Invariant measurements are always stored in ``log.diagnostics``. With
    ``debug_invariants`` a breach raises :class:`InvariantViolation`;
    ``dual_bound`` caps ``||beta_t q_i||`` and ``grad_bound`` caps the norm of
    the loss subgradient estimates.
    """
    if T < 1:
        raise ParameterError(f"horizon must be >= 1, got T={T!r}")
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    table = ParamTable(schedule, T)
    state = init_agents(family.n, fset, schedule, family.m, init_rule, seed)
    n = family.n
    loss = np.empty((T, n))
    violation = np.empty((T, n))
    triggers = np.zeros(T, dtype=np.int64)
    triggers[0] = n
    decisions = np.empty((T, n, fset.dim)) if record_decisions else None
    diag = _Diagnostics(T, debug_invariants, fset, dual_bound, grad_bound)

    for t in range(1, T + 1):
        rp = family.round(t)
        params = table[t]
        loss[t - 1], violation[t - 1] = evaluate_decisions(rp, state.x)
        if decisions is not None:
            decisions[t - 1] = state.x
        if t == T:
            diag.record(t, state, params, None)
            break
        W = graphs.mixing(t)
        new_state, out = run_round(t, state, rp, W, params, table[t + 1], fset, mode, seed)
        diag.record(t, state, params, out.u, out.est_f)
        triggers[t] = int(out.broadcast.sum())
        state = new_state

    return MetricsLog(
        n=n,
        loss=loss,
        violation=violation,
        triggers=triggers,
        decisions=decisions,
        diagnostics=diag.as_dict(),
        seed=seed,
    )
