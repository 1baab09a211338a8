"""Per-round loss and constraint oracles.

A *round problem* bundles, for every agent ``i``, a convex loss ``f_i`` and a
convex vector constraint ``g_i`` (feasible where ``g_i(x) <= 0``). The
simulator reaches them through batched methods so that all agents can be
evaluated with a single array operation:

``loss_all(X)``
    ``f_i(X[i])`` for every agent, shape ``(n,)``.
``constraint_all(X)``
    ``g_i(X[i])`` for every agent, shape ``(n, m)``.
``global_loss(Y)``
    ``f(y) = mean_j f_j(y)`` for every row of ``Y``; used only by metrics.
``global_constraint(Y)``
    stacked ``col(g_1(y), ..., g_n(y))`` for every row of ``Y``.

The regression benchmark (:class:`RegressionRound`) implements all of these in
closed form. :class:`CustomRound` wraps arbitrary callables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from bandit_dopd import rng as rngmod
from bandit_dopd.geometry import FeasibleSet


class RoundProblem(Protocol):
    n: int
    p: int
    m: int

    def loss(self, i: int, x) -> float: ...

    def constraint(self, i: int, x) -> np.ndarray: ...

    def loss_all(self, X) -> np.ndarray: ...

    def constraint_all(self, X) -> np.ndarray: ...

    def global_loss(self, Y) -> np.ndarray: ...

    def global_constraint(self, Y) -> np.ndarray: ...


def _as_point(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (p,):
        raise ValueError(f"expected a point of dimension {p}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class RegressionRound:
    """One round of the distributed online linear regression benchmark.

    Agent ``i`` has loss ``0.5 * ||A_i x - theta_i||^2`` and constraint
    ``B_i x - b_i``. Arrays are stacked over agents: ``A`` is ``(n, q, p)``,
    ``theta`` is ``(n, q)``, ``B`` is ``(n, m, p)`` and ``b`` is ``(n, m)``.
    """

    A: np.ndarray
    theta: np.ndarray
    B: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[2]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    # -- single-agent oracles ------------------------------------------------

    def loss(self, i: int, x) -> float:
        x = _as_point(x, self.p)
        r = self.A[i] @ x - self.theta[i]
        return 0.5 * float(r @ r)

    def constraint(self, i: int, x) -> np.ndarray:
        x = _as_point(x, self.p)
        return self.B[i] @ x - self.b[i]

    def loss_subgrad(self, i: int, x) -> np.ndarray:
        """Gradient ``A_i^T (A_i x - theta_i)``."""
        x = _as_point(x, self.p)
        return self.A[i].T @ (self.A[i] @ x - self.theta[i])

    def constraint_plus_subgrad(self, i: int, x) -> np.ndarray:
        """A subgradient of ``[g_i(x)]_+`` as a ``(p, m)`` matrix.

        Column ``k`` is row ``k`` of ``B_i`` when ``g_ik(x) > 0`` and zero
        otherwise, including on the boundary ``g_ik(x) = 0``.
        """
        x = _as_point(x, self.p)
        active = self.constraint(i, x) > 0
        return self.B[i].T * active

    # -- batched oracles -----------------------------------------------------

    def loss_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        r = np.einsum("iqp,ip->iq", self.A, X) - self.theta
        return 0.5 * np.einsum("iq,iq->i", r, r)

    def constraint_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        return np.einsum("imp,ip->im", self.B, X) - self.b

    def loss_subgrad_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        r = np.einsum("iqp,ip->iq", self.A, X) - self.theta
        return np.einsum("iqp,iq->ip", self.A, r)

    def constraint_plus_subgrad_all(self, X) -> np.ndarray:
        active = self.constraint_all(X) > 0
        return np.swapaxes(self.B, 1, 2) * active[:, None, :]

    def global_loss(self, Y) -> np.ndarray:
        Y = _as_point(Y, self.p)
        r = np.einsum("jqp,kp->kjq", self.A, Y) - self.theta[None]
        return 0.5 * np.einsum("kjq,kjq->k", r, r) / self.n

    def global_constraint(self, Y) -> np.ndarray:
        Y = _as_point(Y, self.p)
        g = np.einsum("jmp,kp->kjm", self.B, Y) - self.b[None]
        return g.reshape(Y.shape[0], -1)

    def global_loss_grad(self, y) -> np.ndarray:
        H, c, _ = self.global_quadratic()
        return H @ _as_point(y, self.p) - c

    def global_constraint_jac(self, y) -> np.ndarray:
        """``(p, n*m)`` Jacobian of the stacked constraint."""
        return self.stacked_constraints()[0].T

    # -- quadratic form, used by the exact comparator ------------------------

    def global_quadratic(self) -> tuple[np.ndarray, np.ndarray, float]:
        """``(H, c, k)`` with ``f(x) = 0.5 x^T H x - c^T x + k``."""
        H = np.einsum("jqp,jqr->pr", self.A, self.A) / self.n
        c = np.einsum("jqp,jq->p", self.A, self.theta) / self.n
        k = 0.5 * float(np.sum(self.theta**2)) / self.n
        return H, c, k

    def stacked_constraints(self) -> tuple[np.ndarray, np.ndarray]:
        """``(G, h)`` with the stacked constraint equal to ``G x - h``."""
        return self.B.reshape(-1, self.p), self.b.reshape(-1)


def gen_regression_round(rng: np.random.Generator, n: int, p: int, q: int, m: int) -> RegressionRound:
    """Draw one benchmark round for ``n`` agents.

    Entries of ``A`` are U[-1, 1], ``theta = A 1 + zeta`` with standard normal
    ``zeta``, entries of ``B`` are U[0, 2] and entries of ``b`` are U[0, 1].
    """
    if min(n, p, q, m) < 1:
        raise ValueError(f"dimensions must be positive, got n={n} p={p} q={q} m={m}")
    A = rng.uniform(-1.0, 1.0, size=(n, q, p))
    theta = A.sum(axis=2) + rng.standard_normal((n, q))
    B = rng.uniform(0.0, 2.0, size=(n, m, p))
    b = rng.uniform(0.0, 1.0, size=(n, m))
    return RegressionRound(A, theta, B, b)


class CustomRound:
    """A round problem assembled from per-agent callables.

    ``losses[i](x) -> float`` and ``constraints[i](x) -> array of length m``.
    Optional ``loss_grads[i](x)`` enable the full-information mode and the
    comparator solvers; without them central finite differences are used.
    """

    def __init__(
        self,
        losses: Sequence[Callable],
        constraints: Sequence[Callable],
        p: int,
        loss_grads: Optional[Sequence[Callable]] = None,
        constraint_jacs: Optional[Sequence[Callable]] = None,
    ):
        if len(losses) != len(constraints):
            raise ValueError("need one loss and one constraint oracle per agent")
        self.losses = list(losses)
        self.constraints = list(constraints)
        self.loss_grads = None if loss_grads is None else list(loss_grads)
        self.constraint_jacs = None if constraint_jacs is None else list(constraint_jacs)
        self.n = len(self.losses)
        self.p = int(p)
        self.m = int(np.atleast_1d(self.constraints[0](np.zeros(self.p))).shape[0])

    def loss(self, i: int, x) -> float:
        return float(self.losses[i](_as_point(x, self.p)))

    def constraint(self, i: int, x) -> np.ndarray:
        g = np.atleast_1d(np.asarray(self.constraints[i](_as_point(x, self.p)), dtype=float))
        if g.shape != (self.m,):
            raise ValueError(f"constraint oracle {i} returned shape {g.shape}, expected ({self.m},)")
        return g

    def loss_subgrad(self, i: int, x) -> np.ndarray:
        x = _as_point(x, self.p)
        if self.loss_grads is not None:
            return np.asarray(self.loss_grads[i](x), dtype=float)
        return _central_diff(lambda y: np.array([self.loss(i, y)]), x)[:, 0]

    def constraint_jac(self, i: int, x) -> np.ndarray:
        """Jacobian of ``g_i`` as a ``(p, m)`` matrix."""
        x = _as_point(x, self.p)
        if self.constraint_jacs is not None:
            return np.asarray(self.constraint_jacs[i](x), dtype=float).reshape(self.p, self.m)
        return _central_diff(lambda y: self.constraint(i, y), x)

    def constraint_plus_subgrad(self, i: int, x) -> np.ndarray:
        return self.constraint_jac(i, x) * (self.constraint(i, x) > 0)

    def loss_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        return np.array([self.loss(i, X[i]) for i in range(self.n)])

    def constraint_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        return np.array([self.constraint(i, X[i]) for i in range(self.n)]).reshape(self.n, self.m)

    def loss_subgrad_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        return np.array([self.loss_subgrad(i, X[i]) for i in range(self.n)])

    def constraint_plus_subgrad_all(self, X) -> np.ndarray:
        X = _as_point(X, self.p)
        return np.array([self.constraint_plus_subgrad(i, X[i]) for i in range(self.n)])

    def global_loss(self, Y) -> np.ndarray:
        Y = np.atleast_2d(_as_point(Y, self.p))
        return np.array([np.mean([self.loss(j, y) for j in range(self.n)]) for y in Y])

    def global_constraint(self, Y) -> np.ndarray:
        Y = np.atleast_2d(_as_point(Y, self.p))
        return np.array([np.concatenate([self.constraint(j, y) for j in range(self.n)]) for y in Y])

    def global_loss_grad(self, y) -> np.ndarray:
        return np.mean([self.loss_subgrad(j, y) for j in range(self.n)], axis=0)

    def global_constraint_jac(self, y) -> np.ndarray:
        """``(p, n*m)`` Jacobian of the stacked constraint."""
        return np.concatenate([self.constraint_jac(j, y) for j in range(self.n)], axis=1)


def _central_diff(fun: Callable, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    cols = []
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.array(cols)


class RegressionFamily:
    """Lazily generated benchmark rounds.

    Round ``t`` is a pure function of ``(seed, t)``, so any round can be
    regenerated on demand and nothing is stored.
    """

    kind = "regression"

    def __init__(self, n: int, p: int, q: int, m: int, seed: int):
        self.n, self.p, self.q, self.m = int(n), int(p), int(q), int(m)
        self.seed = int(seed)

    def round(self, t: int) -> RegressionRound:
        return gen_regression_round(rngmod.stream(self.seed, rngmod.PROBLEM, t), self.n, self.p, self.q, self.m)


class CustomFamily:
    """Wrap a user callable ``t -> RoundProblem``."""

    kind = "custom"

    def __init__(self, factory: Callable[[int], RoundProblem], n: int, p: int, m: int):
        self.factory = factory
        self.n, self.p, self.m = int(n), int(p), int(m)

    def round(self, t: int) -> RoundProblem:
        return self.factory(t)


@dataclass(frozen=True)
class ProblemBounds:
    """Empirical Lipschitz/boundedness constants of a problem family.

    ``F1`` bounds the loss range and ``||g||``; ``F2`` bounds subgradient
    norms. ``dual_bound`` is ``F1 + 2 p F2 R``, the bound on ``||beta_t q_t||``.
    """

    F1: float
    F2: float
    p: int
    outer_radius: float

    @property
    def dual_bound(self) -> float:
        return self.F1 + 2 * self.p * self.F2 * self.outer_radius


def estimate_bounds(
    family,
    fset: FeasibleSet,
    rounds: Iterable[int],
    samples: int = 10_000,
    seed: int = 0,
    inflation: float = 1.1,
) -> ProblemBounds:
    """Estimate ``F1`` and ``F2`` by sampling ``x`` in ``fset``.

    For every listed round, ``samples`` points are split evenly across agents.
    Half of each agent's points are uniform in ``fset`` and half are extreme
    points (box vertices or boundary-sphere points), where convex oracles
    attain their maxima. The largest observed loss range, constraint norm and
    (sub)gradient norm are inflated by ``inflation``.
    """
    if samples < 10_000:
        raise ValueError("at least 10^4 samples are required")
    loss_range = 0.0
    g_norm = 0.0
    grad_norm = 0.0
    for t in rounds:
        rp = family.round(t)
        rng = rngmod.stream(seed, rngmod.BOUNDS, t)
        per_agent = max(2, -(-samples // rp.n))
        half = per_agent // 2
        X = np.concatenate([fset.sample(rng, size=(per_agent - half, rp.n)),
                            fset.sample_extreme(rng, size=(half, rp.n))])
        for k in range(per_agent):
            vals = rp.loss_all(X[k])
            if k == 0:
                lo, hi = vals.copy(), vals.copy()
            else:
                lo, hi = np.minimum(lo, vals), np.maximum(hi, vals)
            g_norm = max(g_norm, float(np.max(np.linalg.norm(rp.constraint_all(X[k]), axis=1))))
            grad_norm = max(grad_norm, float(np.max(np.linalg.norm(rp.loss_subgrad_all(X[k]), axis=1))))
            grad_norm = max(grad_norm, _max_constraint_grad_norm(rp, X[k]))
        loss_range = max(loss_range, float(np.max(hi - lo)))
    F1 = inflation * max(loss_range, g_norm)
    F2 = inflation * grad_norm
    return ProblemBounds(F1=F1, F2=F2, p=fset.dim, outer_radius=fset.outer_radius)


def _max_constraint_grad_norm(rp, X) -> float:
    if isinstance(rp, RegressionRound):
        # Constraint Jacobian is B regardless of x.
        return float(np.max(np.linalg.norm(rp.B, axis=(1, 2))))
    return max(float(np.linalg.norm(rp.constraint_jac(i, X[i]))) for i in range(rp.n))
