"""Offline comparators: per-round (dynamic) and single fixed (static) optima.

The dynamic comparator minimizes ``f_t`` subject to ``g_t <= 0`` on ``X`` for
every round; the static comparator minimizes ``sum_t f_t`` subject to every
``g_t <= 0``.

Two solvers are available:

``qp``
    exact convex QP through cvxpy, for the regression benchmark whose global
    loss is quadratic and whose constraints are linear;
``penalty``
    projected subgradient descent on ``f + rho * sum_k [g_k]_+`` with
    escalating ``rho``, followed by an SLSQP polish; works for any round
    problem with (sub)gradient oracles.

``method="auto"`` picks ``qp`` when every round is a :class:`RegressionRound`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from bandit_dopd.geometry import Ball, Box, FeasibleSet
from bandit_dopd.metrics import ComparatorSequence
from bandit_dopd.problem import RegressionRound

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6


@dataclass(frozen=True)
class PenaltyParams:
    rhos: tuple = (10.0, 1e2, 1e3, 1e4)
    iterations: int = 500
    step: float = 1.0  # multiplied by the outer radius of X; step_k = step * R / sqrt(k)
    feas_tol: float = FEAS_TOL
    polish: bool = True


def _rounds(problems, T: int | None) -> list:
    if hasattr(problems, "round"):
        if T is None:
            raise ValueError("T is required when passing a problem family")
        return [problems.round(t) for t in range(1, T + 1)]
    rounds = list(problems)
    return rounds if T is None else rounds[:T]


def _pick(rounds, method: str) -> str:
    if method == "auto":
        return "qp" if all(isinstance(r, RegressionRound) for r in rounds) else "penalty"
    if method not in ("qp", "penalty"):
        raise ValueError(f"unknown comparator method {method!r}")
    return method


# -- exact QP route ----------------------------------------------------------


def _set_constraints(cp, x, fset: FeasibleSet):
    if isinstance(fset, Box):
        return [x <= fset.half_width, x >= -fset.half_width]
    if isinstance(fset, Ball):
        return [cp.norm(x, 2) <= fset.radius]
    raise TypeError(f"unsupported set {fset!r}")


def _solve_qp(cp, problem, x) -> np.ndarray:
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        problem.solve(solver=cp.OSQP, eps_abs=1e-10, eps_rel=1e-10, max_iter=200_000)
    if x.value is None:
        raise RuntimeError(f"QP solver failed with status {problem.status}")
    return np.asarray(x.value, dtype=float)


def _qp_dynamic(rounds: Sequence[RegressionRound], fset: FeasibleSet) -> np.ndarray:
    import cvxpy as cp

    r0 = rounds[0]
    n, q, p = r0.A.shape
    M = cp.Parameter((n * q, p))
    v = cp.Parameter(n * q)
    G = cp.Parameter((n * r0.m, p))
    h = cp.Parameter(n * r0.m)
    x = cp.Variable(p)
    problem = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(M @ x - v)), [G @ x <= h, *_set_constraints(cp, x, fset)])
    ys = []
    scale = 1.0 / np.sqrt(n)
    for rp in rounds:
        M.value = rp.A.reshape(n * q, p) * scale
        v.value = rp.theta.reshape(-1) * scale
        G.value, h.value = rp.stacked_constraints()
        ys.append(_solve_qp(cp, problem, x))
    return np.array(ys)


def _qp_static(rounds: Sequence[RegressionRound], fset: FeasibleSet) -> np.ndarray:
    import cvxpy as cp

    p = rounds[0].p
    H = np.zeros((p, p))
    c = np.zeros(p)
    for rp in rounds:
        Ht, ct, _ = rp.global_quadratic()
        H += Ht
        c += ct
    H /= len(rounds)
    c /= len(rounds)
    # 0.5 x'Hx - c'x = 0.5 ||L'x - L^{-1}c||^2 + const with H = L L'.
    w, V = scipy.linalg.eigh(H)
    w = np.maximum(w, 1e-14)
    root = (V * np.sqrt(w)) @ V.T
    target = np.linalg.solve(root, c)
    G = np.concatenate([rp.stacked_constraints()[0] for rp in rounds])
    h = np.concatenate([rp.stacked_constraints()[1] for rp in rounds])
    x = cp.Variable(p)
    problem = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(root @ x - target)),
                         [G @ x <= h, *_set_constraints(cp, x, fset)])
    return _solve_qp(cp, problem, x)


# -- generic penalty route ---------------------------------------------------


def _global_grad(rp, y) -> np.ndarray:
    if hasattr(rp, "global_loss_grad"):
        return rp.global_loss_grad(y)
    return np.mean([rp.loss_subgrad(j, y) for j in range(rp.n)], axis=0)


def _global_jac(rp, y) -> np.ndarray:
    if hasattr(rp, "global_constraint_jac"):
        return rp.global_constraint_jac(y)
    return np.concatenate([rp.constraint_jac(j, y) for j in range(rp.n)], axis=1)


def _penalty_solve(obj: Callable, grad: Callable, cons: Callable, jac: Callable, fset: FeasibleSet,
                   params: PenaltyParams) -> tuple[np.ndarray, bool]:
    """Minimize ``obj`` subject to ``cons <= 0`` on ``fset``; returns ``(x, feasible)``."""
    x = np.zeros(fset.dim)
    R = fset.outer_radius

    def penalized(y, rho):
        return obj(y) + rho * np.sum(np.maximum(cons(y), 0.0))

    best = x.copy()
    for rho in params.rhos:
        best_val = penalized(best, rho)
        for k in range(1, params.iterations + 1):
            g = cons(x)
            sub = grad(x) + rho * jac(x) @ (g > 0).astype(float)
            norm = np.linalg.norm(sub)
            if norm == 0:
                break
            x = fset.project(x - params.step * R / np.sqrt(k) * sub / norm)
            val = penalized(x, rho)
            if val < best_val:
                best, best_val = x.copy(), val
        x = best.copy()
        if np.max(cons(best), initial=-np.inf) <= params.feas_tol:
            break

    if params.polish:
        constraints = [{"type": "ineq", "fun": lambda y: -cons(y), "jac": lambda y: -jac(y).T}]
        bounds = None
        if isinstance(fset, Box):
            bounds = fset.bounds()
        else:
            constraints.append({"type": "ineq", "fun": lambda y: fset.radius**2 - y @ y, "jac": lambda y: -2 * y})
        res = minimize(obj, best, jac=grad, method="SLSQP", bounds=bounds, constraints=constraints,
                       options={"ftol": 1e-14, "maxiter": 500})
        cand = fset.project(res.x)
        cand_viol = np.max(cons(cand), initial=-np.inf)
        best_viol = np.max(cons(best), initial=-np.inf)
        if cand_viol <= params.feas_tol and (best_viol > params.feas_tol or obj(cand) <= obj(best) + 1e-12):
            best = cand
    feasible = bool(np.max(cons(best), initial=-np.inf) <= params.feas_tol)
    return best, feasible


def _penalty_dynamic(rounds, fset: FeasibleSet, params: PenaltyParams) -> tuple[np.ndarray, bool]:
    ys, ok = [], True
    for rp in rounds:
        y, feasible = _penalty_solve(
            lambda z: float(rp.global_loss(z[None])[0]),
            lambda z: _global_grad(rp, z),
            lambda z: rp.global_constraint(z[None])[0],
            lambda z: _global_jac(rp, z),
            fset, params,
        )
        ys.append(y)
        ok &= feasible
    return np.array(ys), ok


def _penalty_static(rounds, fset: FeasibleSet, params: PenaltyParams) -> tuple[np.ndarray, bool]:
    T = len(rounds)
    return _penalty_solve(
        lambda z: sum(float(rp.global_loss(z[None])[0]) for rp in rounds) / T,
        lambda z: sum(_global_grad(rp, z) for rp in rounds) / T,
        lambda z: np.concatenate([rp.global_constraint(z[None])[0] for rp in rounds]),
        lambda z: np.concatenate([_global_jac(rp, z) for rp in rounds], axis=1),
        fset, params,
    )


# -- public API --------------------------------------------------------------


def _finish(rounds, Y: np.ndarray, kind: str, fset: FeasibleSet, converged: bool) -> ComparatorSequence:
    Y = fset.project(Y)
    losses = np.array([float(rp.global_loss(y[None])[0]) for rp, y in zip(rounds, Y)])
    viol = max(float(np.max(rp.global_constraint(y[None])[0])) for rp, y in zip(rounds, Y))
    if viol > FEAS_TOL:
        converged = False
    if not converged:
        log.warning("%s comparator not converged (max violation %.3g)", kind, viol)
    return ComparatorSequence(y=Y, losses=losses, kind=kind, max_violation=viol, converged=converged)


def solve_dynamic_comparator(problems, fset: FeasibleSet, T: int | None = None, method: str = "auto",
                             params: PenaltyParams = PenaltyParams()) -> ComparatorSequence:
    """Per-round constrained minimizers ``y_t`` of ``f_t``."""
    rounds = _rounds(problems, T)
    if _pick(rounds, method) == "qp":
        Y, ok = _qp_dynamic(rounds, fset), True
    else:
        Y, ok = _penalty_dynamic(rounds, fset, params)
    return _finish(rounds, Y, "dynamic", fset, ok)


def solve_static_comparator(problems, fset: FeasibleSet, T: int | None = None, method: str = "auto",
                            params: PenaltyParams = PenaltyParams()) -> ComparatorSequence:
    """The single minimizer of ``sum_t f_t`` feasible for every round, repeated ``T`` times."""
    rounds = _rounds(problems, T)
    if _pick(rounds, method) == "qp":
        y, ok = _qp_static(rounds, fset), True
    else:
        y, ok = _penalty_static(rounds, fset, params)
    Y = np.tile(y, (len(rounds), 1))
    return _finish(rounds, Y, "static", fset, ok)
