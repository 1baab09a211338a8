"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line for its criterion before asserting,
so ``pytest -v -s`` (or the captured output of a failure) shows the verdict and
the measured numbers.
"""

import itertools
import time

import numpy as np
import pytest

from bandit_dopd.algorithm import run_horizon
from bandit_dopd.comparators import solve_static_comparator
from bandit_dopd.config import parse_config
from bandit_dopd.estimator import est_loss_subgrad, smoothed_value
from bandit_dopd.geometry import Ball, Box, sample_unit_sphere
from bandit_dopd.harness import bounds_for, run_experiment, simulate
from bandit_dopd.metrics import network_regret
from bandit_dopd.network import GraphProcess, check_b_connectivity
from bandit_dopd.problem import CustomFamily, CustomRound, RegressionFamily
from bandit_dopd.schedules import NoTrigger, Theorem2

SEEDS = (1, 2, 3, 4, 5)


def report(capsys, k: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")


def desk(**overrides):
    return parse_config(preset="desk", overrides=overrides)


# -- 1: determinism and runtime -----------------------------------------------------


def test_criterion_1_determinism(tmp_path, capsys):
    cfg = desk(seed=1)
    times = []
    for name in ("a", "b"):
        start = time.perf_counter()
        run_experiment(cfg, tmp_path / name)
        times.append(time.perf_counter() - start)
    same = (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    ok = same and max(times) < 120
    report(capsys, 1, ok, f"byte-identical={same}, desk runtime {max(times):.1f}s (< 120s)")
    assert ok


# -- 2: projection against a grid oracle --------------------------------------------


def _grid(fset, spacing):
    """Grid points of spacing ``spacing`` that lie in ``fset``."""
    k = int(np.ceil(fset.outer_radius / spacing))
    axis = spacing * np.arange(-k, k + 1)
    G = np.array(list(itertools.product(axis, repeat=fset.dim)))
    if isinstance(fset, Box):
        return G[np.all(np.abs(G) <= fset.half_width, axis=1)]
    return G[np.linalg.norm(G, axis=1) <= fset.radius]


def _grid_argmin(G, X, chunk=50):
    g2 = np.sum(G**2, axis=1)
    out = np.empty_like(X)
    for s in range(0, len(X), chunk):
        x = X[s:s + chunk]
        d = g2[None] - 2 * x @ G.T
        out[s:s + chunk] = G[np.argmin(d, axis=1)]
    return out


def test_criterion_2_projection_oracle(capsys):
    spacing = 1e-2
    rng = np.random.default_rng(2)
    worst_gap, worst_idem, worst_nonexp = 0.0, 0.0, -np.inf
    ok = True
    for p in (1, 2, 3):
        size = 0.3 if p == 3 else 1.0
        for fset in (Box(size, p), Ball(size, p)):
            X = rng.uniform(-3 * size, 3 * size, size=(1000, p))
            P = fset.project(X)
            G = _grid(fset, spacing)
            ref = _grid_argmin(G, X)
            d_proj = np.linalg.norm(P - X, axis=1)
            d_grid = np.linalg.norm(ref - X, axis=1)
            # projection is optimal and the grid optimum is within one spacing of it
            ok &= bool(np.all(d_proj <= d_grid + 1e-12))
            gap = np.max(d_grid - d_proj)
            worst_gap = max(worst_gap, gap)
            ok &= bool(gap <= spacing)
            if isinstance(fset, Box):
                ok &= bool(np.max(np.abs(P - ref)) <= spacing)
            idem = np.max(np.abs(fset.project(P) - P))
            worst_idem = max(worst_idem, idem)
            ok &= bool(idem == 0.0)
            Y = rng.uniform(-3 * size, 3 * size, size=(1000, p))
            excess = np.linalg.norm(P - fset.project(Y), axis=1) - np.linalg.norm(X - Y, axis=1)
            worst_nonexp = max(worst_nonexp, excess.max())
            ok &= bool(excess.max() <= 1e-12)
    report(capsys, 2, ok, f"max grid gap {worst_gap:.2e} (<= 1e-2), idempotence err {worst_idem:.1e}, "
                          f"max non-expansion excess {worst_nonexp:.1e} (<= 1e-12)")
    assert ok


# -- 3 and 4: estimator --------------------------------------------------------------


def _quadratic():
    rp = RegressionFamily(1, 4, 2, 2, seed=3).round(1)
    fset = Box(5.0, 4)
    vertices = np.array(list(itertools.product((-5.0, 5.0), repeat=4)))
    # the gradient norm is convex in x, so its max over the box sits at a vertex
    F2 = max(np.linalg.norm(rp.loss_subgrad(0, v)) for v in vertices)
    return rp, fset, F2


def test_criterion_3_estimator_unbiased(capsys):
    rp, fset, F2 = _quadratic()
    rng = np.random.default_rng(3)
    delta, N, p = 0.1, 100_000, 4
    worst_z, worst_ratio = 0.0, 0.0
    ok = True
    for x in fset.sample(rng, size=5, shrink=0.9):
        U = sample_unit_sphere(rng, p, N)
        fx = rp.loss(0, x)
        fplus = 0.5 * np.sum(((x + delta * U) @ rp.A[0].T - rp.theta[0]) ** 2, axis=1)
        est = est_loss_subgrad(fx, fplus, U, delta)
        se = est.std(axis=0, ddof=1) / np.sqrt(N)
        z = np.abs(est.mean(axis=0) - rp.loss_subgrad(0, x)) / se
        worst_z = max(worst_z, z.max())
        ok &= bool(np.all(z <= 3))
        ratio = np.linalg.norm(est, axis=1).max() / (p * F2)
        worst_ratio = max(worst_ratio, ratio)
        ok &= bool(ratio <= 1)
    report(capsys, 3, ok, f"max |mean - grad| = {worst_z:.2f} SE (<= 3), max ||est|| / (p F2) = {worst_ratio:.3f} (<= 1)")
    assert ok


def test_criterion_4_smoothed_sandwich(capsys):
    rp, fset, F2_loss = _quadratic()
    rng = np.random.default_rng(4)
    delta, N = 0.5, 100_000
    B, b = rp.B[0], rp.b[0]
    F2_cons = np.linalg.norm(B, 2)
    oracles = [
        ("loss", lambda X: 0.5 * np.sum((np.atleast_2d(X) @ rp.A[0].T - rp.theta[0]) ** 2, axis=1), F2_loss),
        ("clipped constraint", lambda X: np.linalg.norm(np.maximum(np.atleast_2d(X) @ B.T - b, 0), axis=1), F2_cons),
    ]
    worst_low, worst_high = -np.inf, -np.inf
    ok = True
    for _, f, F2 in oracles:
        for x in fset.sample(rng, size=10, shrink=0.9):
            mean, se = smoothed_value(f, x, delta, N, rng, return_stderr=True)
            fx = float(f(x[None])[0])
            low = (fx - mean) / max(se, 1e-300)
            high = (mean - fx - F2 * delta) / max(se, 1e-300)
            worst_low, worst_high = max(worst_low, low), max(worst_high, high)
            ok &= bool(low <= 2 and high <= 2)
    report(capsys, 4, ok, f"lower side {worst_low:.2f} SE, upper side {worst_high:.2f} SE (both <= 2)")
    assert ok


# -- 5: algorithm invariants over full desk runs ------------------------------------------


@pytest.mark.parametrize("family", ["theorem1", "theorem2"])
def test_criterion_5_invariants(family, capsys):
    cfg = desk(seed=1, debug_invariants=True, **{"schedule.family": family})
    bound = bounds_for(cfg).dual_bound
    log = simulate(cfg)  # raises InvariantViolation on the first breach
    d = log.diagnostics
    counts = {
        "trigger": int(np.sum(d["trigger_gap"] > 0)),
        "dual sign": int(np.sum(d["min_dual"] < 0)),
        "dual bound": int(np.sum(d["max_scaled_dual"] > bound)),
        "decision set": int(np.sum(~d["decision_ok"])),
        "probe set": int(np.sum(~d["probe_ok"])),
    }
    ok = sum(counts.values()) == 0 and log.T == 2000
    report(capsys, 5, ok, f"{family}: violations {counts} over T={log.T}, n={log.n}")
    assert ok


# -- 6: mixing and connectivity -------------------------------------------------------------


def test_criterion_6_mixing_and_windows(capsys):
    cfg = desk(seed=1)
    graphs = cfg.build_graphs()
    worst = 0.0
    nonneg = True
    for t in range(1, cfg.T + 1):
        W = graphs.mixing(t)
        worst = max(worst, np.abs(W.sum(axis=0) - 1).max(), np.abs(W.sum(axis=1) - 1).max())
        nonneg &= bool(np.all(W >= 0))
    starts = np.random.default_rng(6).choice(np.arange(1, cfg.T - 2), size=100, replace=False)
    connected = sum(check_b_connectivity([graphs.graph(s + k) for k in range(4)]) for s in starts)
    ok = worst <= 1e-12 and nonneg and connected == 100
    report(capsys, 6, ok, f"max row/col sum error {worst:.1e} over {cfg.T} rounds, {connected}/100 windows connected")
    assert ok


# -- 7: sublinearity trends -------------------------------------------------------------------


HORIZONS = (500, 1000, 2000, 4000)


def _trend(cfg):
    """Seed-averaged regret(T)/T and CCV(T)/T at every horizon.

    Step sizes do not depend on the horizon, so the first ``T`` rounds of a
    4000-round run are the ``T``-round run; only the comparator is re-solved.
    """
    regret = np.zeros(len(HORIZONS))
    ccv = np.zeros(len(HORIZONS))
    for seed in SEEDS:
        c = cfg.replace(seed=seed, T=max(HORIZONS))
        log = simulate(c)
        fam, fset = c.build_family(), c.build_set()
        for k, T in enumerate(HORIZONS):
            regret[k] += network_regret(log, solve_static_comparator(fam, fset, T=T), T=T) / T
            ccv[k] += log.avg_cum_ccv[T - 1] / T
    return regret / len(SEEDS), ccv / len(SEEDS)


def test_criterion_7_prefix_equals_shorter_run():
    cfg = desk(seed=2, T=max(HORIZONS))
    long = simulate(cfg)
    short = simulate(cfg.replace(T=HORIZONS[0]))
    np.testing.assert_array_equal(long.loss[:HORIZONS[0]], short.loss)
    np.testing.assert_array_equal(long.violation[:HORIZONS[0]], short.violation)


def test_criterion_7_sublinearity(capsys):
    start = time.perf_counter()
    lines, ok = [], True
    schedules = {
        "theorem1 kappa=0.5 theta=1": desk(**{"schedule.family": "theorem1", "schedule.kappa": 0.5,
                                              "trigger.theta": 1.0}),
        "theorem2 theta1=theta2=0.5 theta3=1": desk(**{"schedule.family": "theorem2", "schedule.theta1": 0.5,
                                                       "schedule.theta2": 0.5, "trigger.theta3": 1.0}),
    }
    for name, cfg in schedules.items():
        regret, ccv = _trend(cfg)
        good = bool(np.all(np.diff(regret) < 0) and np.all(np.diff(ccv) < 0))
        ok &= good
        lines.append(f"{name}: regret/T {np.round(regret, 4).tolist()}, CCV/T {np.round(ccv, 4).tolist()}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    report(capsys, 7, ok, f"strictly decreasing at T={list(HORIZONS)}, {elapsed:.0f}s (< 600s); " + "; ".join(lines))
    assert ok


# -- 8 and 9: trigger threshold sweep and full-information baseline ---------------------------------


TAU0 = (0.0, 4.0, 8.0)


@pytest.fixture(scope="module")
def tau_sweep():
    finals = {}
    for tau0 in TAU0:
        rows = []
        for seed in SEEDS:
            log = simulate(desk(seed=seed, **{"trigger.tau0": tau0}))
            rows.append((log.avg_cum_loss[-1] / log.T, log.avg_cum_ccv[-1] / log.T, log.cum_triggers[-1]))
        finals[tau0] = np.mean(rows, axis=0)
    return finals


def _ordered_with_one_small_inversion(values, tol=0.02):
    drops = [(a - b) / abs(a) for a, b in zip(values, values[1:]) if b < a]
    return len(drops) <= 1 and all(d <= tol for d in drops)


def test_criterion_8_trigger_threshold_sweep(tau_sweep, capsys):
    loss = [tau_sweep[t][0] for t in TAU0]
    ccv = [tau_sweep[t][1] for t in TAU0]
    trig = [int(tau_sweep[t][2]) for t in TAU0]
    trig_ok = bool(np.all(np.diff(trig) < 0))
    loss_ok = _ordered_with_one_small_inversion(loss)
    ccv_ok = _ordered_with_one_small_inversion(ccv)
    ok = trig_ok and loss_ok and ccv_ok
    report(capsys, 8, ok, f"tau0={list(TAU0)}: triggers {trig} (decreasing={trig_ok}), "
                          f"loss {np.round(loss, 5).tolist()} (ok={loss_ok}), "
                          f"CCV {np.round(ccv, 5).tolist()} (ok={ccv_ok})")
    assert ok


def test_criterion_9_bandit_vs_full_information(tau_sweep, capsys):
    bandit = tau_sweep[0.0][0]
    runs = [simulate(desk(seed=s, mode="full_info", **{"trigger.tau0": 0.0})) for s in SEEDS]
    full = np.mean([log.avg_cum_loss[-1] / log.T for log in runs])
    ok = bool(bandit >= full)
    report(capsys, 9, ok, f"tau0=0 final average cumulative loss per round: bandit {bandit:.5f} >= full-info {full:.5f}")
    assert ok


# -- 10: consensus with zero oracles --------------------------------------------------------------


def test_criterion_10_consensus(capsys):
    n, p = 10, 4
    zero = CustomRound([lambda x: 0.0] * n, [lambda x: np.zeros(1)] * n, p=p,
                       loss_grads=[lambda x: np.zeros(p)] * n, constraint_jacs=[lambda x: np.zeros((1, p))] * n)
    fam = CustomFamily(lambda t: zero, n, p, 1)
    log = run_horizon(500, fam, Box(5.0, p), Theorem2(1.0, 0.5, 0.5, NoTrigger(), 5.0),
                      GraphProcess(n, seed=1, p_edge=0.1), init_rule="uniform", seed=1, record_decisions=True)
    X = log.decisions
    dis = np.max(np.linalg.norm(X - X.mean(axis=1, keepdims=True), axis=2), axis=1)
    below = np.flatnonzero(dis < 1e-6)
    ok = below.size > 0
    first = int(below[0]) + 1 if ok else None
    report(capsys, 10, ok, f"initial disagreement {dis[0]:.3f}, below 1e-6 from round {first} (<= 500)")
    assert ok
