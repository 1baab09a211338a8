"""Time-varying communication graphs and their mixing matrices.

Agents are indexed ``0..n-1``. An edge ``(j, i)`` means agent ``i`` receives
from agent ``j``; generators emit both orientations of every undirected link.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from bandit_dopd import rng as rngmod
from bandit_dopd.exceptions import ConnectivityError, ContractViolation

GRAPH_KINDS = ("paper4quarters", "ring", "complete")

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class RoundGraph:
    n: int
    edges: frozenset  # of (j, i) pairs, j != i

    def is_symmetric(self) -> bool:
        return all((i, j) in self.edges for j, i in self.edges)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``adj[i, j]`` true iff ``(j, i)`` is an edge."""
        adj = np.zeros((self.n, self.n), dtype=bool)
        for j, i in self.edges:
            adj[i, j] = True
        return adj


def _undirected(pairs: Iterable[tuple[int, int]]) -> frozenset:
    out = set()
    for a, b in pairs:
        if a != b:
            out.add((a, b))
            out.add((b, a))
    return frozenset(out)


def quarter_blocks(n: int) -> list[range]:
    """Split the path links ``(i, i+1)``, ``i = 0..n-2``, into four consecutive blocks.

    Block sizes differ by at most one and the shorter blocks come first, which
    for ``n = 100`` reproduces the link ranges 1-24, 25-49, 50-74, 75-99 in
    1-based numbering. Adjacent blocks share an endpoint, so the four blocks
    together form a Hamiltonian path.
    """
    links = n - 1
    base, extra = divmod(links, 4)
    sizes = [base] * (4 - extra) + [base + 1] * extra
    blocks, start = [], 0
    for size in sizes:
        blocks.append(range(start, start + size))
        start += size
    return blocks


def gen_round_graph(t: int, n: int, rng: np.random.Generator, p_edge: float, kind: str = "paper4quarters") -> RoundGraph:
    """Graph used at round ``t`` (1-based).

    ``paper4quarters``: Erdos-Renyi links with probability ``p_edge`` plus the
    path links of block ``(t - 1) mod 4`` (see :func:`quarter_blocks`).
    ``ring`` and ``complete`` are static.
    """
    if n < 2:
        raise ValueError(f"need at least two agents, got n={n}")
    if kind == "ring":
        return RoundGraph(n, _undirected((i, (i + 1) % n) for i in range(n)))
    if kind == "complete":
        return RoundGraph(n, _undirected((i, j) for i in range(n) for j in range(i + 1, n)))
    if kind != "paper4quarters":
        raise ValueError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.uniform(size=iu.shape[0]) < p_edge
    pairs = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    block = quarter_blocks(n)[(t - 1) % 4]
    pairs.extend((i, i + 1) for i in block)
    return RoundGraph(n, _undirected(pairs))


def mixing_from_graph(g: RoundGraph) -> np.ndarray:
    """Weights ``1/n`` on every received link, remainder on the diagonal.

    Only symmetric graphs are accepted since only then are the columns
    stochastic as well as the rows.
    """
    if not g.is_symmetric():
        raise ContractViolation("mixing rule 1/n is doubly stochastic only for symmetric graphs")
    W = g.adjacency().astype(float) / g.n
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


def check_mixing(W: np.ndarray, floor: float, graph: RoundGraph | None = None, tol: float = STOCHASTIC_TOL) -> None:
    """Raise :class:`ContractViolation` unless ``W`` is a valid mixing matrix.

    Checks nonnegativity, unit row and column sums, a positive diagonal and,
    when ``graph`` is given, the weight floor on every edge and zero weight off
    the edge set.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ContractViolation(f"mixing matrix must be square, got {W.shape}")
    if np.any(W < 0):
        raise ContractViolation("mixing matrix has negative entries")
    row = np.max(np.abs(W.sum(axis=1) - 1))
    col = np.max(np.abs(W.sum(axis=0) - 1))
    if row > tol or col > tol:
        raise ContractViolation(f"mixing matrix not doubly stochastic (row dev {row:.3g}, col dev {col:.3g})")
    if np.any(np.diag(W) < floor - tol):
        raise ContractViolation("mixing matrix diagonal below weight floor")
    if graph is not None:
        adj = graph.adjacency()
        np.fill_diagonal(adj, True)
        if np.any(W[adj] < floor - tol):
            raise ContractViolation("edge weight below weight floor")
        if np.any(W[~adj] != 0):
            raise ContractViolation("nonzero weight outside the edge set")


def check_b_connectivity(graphs: Sequence[RoundGraph]) -> bool:
    """True iff the union of the given graphs is strongly connected."""
    if not graphs:
        raise ValueError("need at least one graph")
    n = graphs[0].n
    if n == 1:
        return True
    out = [[] for _ in range(n)]
    inn = [[] for _ in range(n)]
    for g in graphs:
        for j, i in g.edges:
            out[j].append(i)
            inn[i].append(j)

    def reaches_all(adj) -> bool:
        seen = [False] * n
        seen[0] = True
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        return all(seen)

    return reaches_all(out) and reaches_all(inn)


def strongly_connected(W_or_adj: np.ndarray) -> bool:
    """Strong connectivity of a weighted/boolean adjacency, via scipy."""
    count, _ = connected_components(csr_matrix(np.asarray(W_or_adj) != 0), directed=True, connection="strong")
    return count == 1


class GraphProcess:
    """Seeded sequence of round graphs with B-connectivity verification.

    Graph ``t`` depends only on ``(seed, t)``. When ``verify`` is set, every
    window of ``b_window`` consecutive rounds is checked as soon as it is
    complete, and :class:`ConnectivityError` is raised on the first failure.
    """

    def __init__(self, n: int, seed: int, p_edge: float = 0.1, kind: str = "paper4quarters",
                 b_window: int = 4, verify: bool = True):
        if kind not in GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
        if b_window < 1:
            raise ValueError("b_window must be >= 1")
        self.n, self.seed, self.p_edge, self.kind = int(n), int(seed), float(p_edge), kind
        self.b_window = int(b_window)
        self.verify = verify
        self._recent: deque = deque(maxlen=self.b_window)

    def graph(self, t: int) -> RoundGraph:
        return gen_round_graph(t, self.n, rngmod.stream(self.seed, rngmod.GRAPH, t), self.p_edge, self.kind)

    def mixing(self, t: int) -> np.ndarray:
        """Mixing matrix for round ``t``; rounds must be requested in order when verifying."""
        if self.n == 1:
            return np.ones((1, 1))
        g = self.graph(t)
        if self.verify:
            self._recent.append(g)
            if len(self._recent) == self.b_window and not check_b_connectivity(list(self._recent)):
                raise ConnectivityError(
                    f"graphs of rounds {t - self.b_window + 1}..{t} are not jointly strongly connected "
                    f"(n={self.n}, p_edge={self.p_edge}, kind={self.kind})"
                )
        return mixing_from_graph(g)
