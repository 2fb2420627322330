"""Reversible continuous-time random walks on finite graphs and their
endpoint kernels.

The time horizon is fixed to ``[0, 1]``.  Matrix exponentials use
uniformization, so every transition kernel is entrywise nonnegative and
stochastic by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.special import logsumexp

from .entropy import Measure, PreconditionError

TAIL_MASS = 1e-14
BALANCE_RTOL = 1e-12


class GraphError(ValueError):
    """Malformed or disconnected graph."""


@dataclass(frozen=True)
class RateGraph:
    """Jump rates ``J[x, y]`` (per unit time) between states of a connected graph."""

    states: tuple
    rates: np.ndarray

    def __post_init__(self):
        J = np.array(self.rates, dtype=float)
        n = len(self.states)
        if J.shape != (n, n):
            raise GraphError(f"rate matrix has shape {J.shape}, expected ({n}, {n})")
        if n < 2:
            raise GraphError("a graph needs at least two states")
        if not np.all(np.isfinite(J)) or np.any(J < 0):
            raise GraphError("rates must be finite and nonnegative")
        if np.any(np.diag(J) != 0):
            raise GraphError("self-loops are not allowed")
        adj = (J > 0) | (J.T > 0)
        if np.any(~adj.any(axis=1)):
            isolated = [self.states[i] for i in np.flatnonzero(~adj.any(axis=1))]
            raise GraphError(f"isolated vertices: {isolated}")
        ncomp, _ = connected_components(adj.astype(int), directed=False)
        if ncomp != 1:
            raise GraphError(f"graph is disconnected ({ncomp} components)")
        J.setflags(write=False)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "rates", J)

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def adjacency(self) -> np.ndarray:
        return (self.rates > 0) | (self.rates.T > 0)

    def index(self, state) -> int:
        return self.states.index(state)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))


@dataclass(frozen=True)
class ReversibleChain:
    """Continuous-time Markov chain with generator ``L`` reversible w.r.t. ``m``."""

    graph: RateGraph
    m: Measure

    def __post_init__(self):
        if not isinstance(self.m, Measure):
            object.__setattr__(self, "m", Measure(self.m))
        m = self.m.weights
        if m.shape != (self.graph.n,):
            raise GraphError("reversing measure has the wrong length")
        if np.any(m <= 0):
            raise GraphError("reversing measure must be positive on every state")
        flux = m[:, None] * self.graph.rates
        scale = np.maximum(flux, flux.T)
        bad = np.abs(flux - flux.T) > BALANCE_RTOL * scale
        if np.any(bad):
            x, y = np.argwhere(bad)[0]
            raise GraphError(
                f"detailed balance fails on edge ({self.graph.states[x]}, "
                f"{self.graph.states[y]}): {float(flux[x, y])!r} != {float(flux[y, x])!r}"
            )

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def rates(self) -> np.ndarray:
        return self.graph.rates

    @property
    def generator(self) -> np.ndarray:
        J = self.graph.rates
        return J - np.diag(J.sum(axis=1))

    def balance_residual(self) -> float:
        flux = self.m.weights[:, None] * self.graph.rates
        return float(np.abs(flux - flux.T).max())


@dataclass(frozen=True)
class EndpointKernel:
    """Joint endpoint measure ``R01`` with its log-domain representation.

    ``log_matrix`` is authoritative; ``matrix`` may underflow to zero for
    strongly slowed-down references.
    """

    log_matrix: np.ndarray
    time_horizon: float = 1.0

    def __post_init__(self):
        lm = np.array(self.log_matrix, dtype=float)
        if lm.ndim != 2:
            raise ValueError("endpoint kernel must be a matrix")
        if np.any(np.isnan(lm)) or np.any(lm == np.inf):
            raise ValueError("log-kernel entries must be finite or -inf")
        lm.setflags(write=False)
        object.__setattr__(self, "log_matrix", lm)

    @property
    def matrix(self) -> np.ndarray:
        return np.exp(self.log_matrix)

    @property
    def shape(self):
        return self.log_matrix.shape

    @property
    def log_row_base(self) -> np.ndarray:
        return logsumexp(self.log_matrix, axis=1)

    @property
    def log_col_base(self) -> np.ndarray:
        return logsumexp(self.log_matrix, axis=0)

    @property
    def row_base(self) -> Measure:
        return Measure(np.exp(self.log_row_base))

    @property
    def col_base(self) -> Measure:
        return Measure(np.exp(self.log_col_base))


# construction


def simple_random_walk(n_states: int, edges, states: Sequence | None = None) -> ReversibleChain:
    """Simple random walk: jump to each of the ``n_x`` neighbours at rate ``1/n_x``.

    Its reversing measure is ``m(x) = n_x``.
    """
    A = np.zeros((n_states, n_states), dtype=bool)
    for i, j in edges:
        if i == j:
            raise GraphError(f"self-loop at {i}")
        A[i, j] = A[j, i] = True
    deg = A.sum(axis=1)
    if np.any(deg == 0):
        raise GraphError(f"isolated vertices: {np.flatnonzero(deg == 0).tolist()}")
    J = A / deg[:, None]
    graph = RateGraph(tuple(states) if states is not None else tuple(range(n_states)), J)
    return ReversibleChain(graph, Measure(deg.astype(float)))


def path_graph(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def cycle_graph(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def chain_from_conductances(conductance: np.ndarray, m) -> ReversibleChain:
    """Reversible chain with ``J[x, y] = c(x, y) / m(x)`` for symmetric ``c``."""
    c = np.asarray(conductance, dtype=float)
    if not np.allclose(c, c.T, rtol=0, atol=0):
        raise GraphError("conductances must be symmetric")
    m = np.asarray(m, dtype=float)
    J = c / m[:, None]
    np.fill_diagonal(J, 0.0)
    return ReversibleChain(RateGraph(tuple(range(len(m))), J), Measure(m))


def random_reversible_chain(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3,
                            low: float = 0.5, high: float = 2.0) -> ReversibleChain:
    """Random connected reversible chain: random spanning tree plus extra edges,
    conductances and reversing measure drawn uniformly from ``[low, high]``."""
    order = rng.permutation(n)
    c = np.zeros((n, n))
    for k in range(1, n):
        i, j = order[k], order[rng.integers(k)]
        c[i, j] = c[j, i] = rng.uniform(low, high)
    for i in range(n):
        for j in range(i + 1, n):
            if c[i, j] == 0 and rng.random() < extra_edge_prob:
                c[i, j] = c[j, i] = rng.uniform(low, high)
    m = rng.uniform(low, high, size=n)
    return chain_from_conductances(c, m)


def grid_diffusion_chain(grid, k: float = 1.0, base=None) -> ReversibleChain:
    """Nearest-neighbour walk on a uniform 1-D grid approximating Brownian
    motion with diffusivity ``1/k`` (generator ``Δ/(2k)``), reflected at the ends.

    ``base`` defaults to the cell width, so ``m`` discretises Lebesgue measure.
    """
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise PreconditionError("grid must be a strictly increasing 1-D array")
    h = np.diff(x)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise PreconditionError("grid must be uniform")
    if k <= 0:
        raise PreconditionError("k must be positive")
    h = h[0]
    n = x.size
    m = np.full(n, h) if base is None else np.asarray(base, dtype=float)
    if not np.allclose(m, m[0]):
        raise PreconditionError("grid diffusion needs a uniform base measure")
    J = np.zeros((n, n))
    rate = 1.0 / (2.0 * k * h * h)
    idx = np.arange(n - 1)
    J[idx, idx + 1] = rate
    J[idx + 1, idx] = rate
    return ReversibleChain(RateGraph(tuple(x.tolist()), J), Measure(m))


# kernels


def _poisson_truncation(lam: float, min_terms: int, tail: float) -> np.ndarray:
    """Poisson(lam) weights ``w_0..w_N``.

    ``N >= min_terms`` and the neglected mass is below ``tail`` times
    ``min(1, w_min_terms)``, using the geometric bound
    ``sum_{j>N} w_j <= w_{N+1} / (1 - lam/(N+2))`` valid once ``N + 2 > lam``.
    """
    w = [math.exp(-lam)]
    n = 0
    while True:
        if n >= min_terms and n + 2 > lam:
            nxt = w[n] * lam / (n + 1)
            bound = nxt / (1.0 - lam / (n + 2))
            if bound < tail * min(1.0, w[min_terms]):
                return np.array(w)
        n += 1
        w.append(w[-1] * lam / n)
        if n > 10_000:
            raise RuntimeError("uniformization failed to truncate")


def transition_kernel(chain: ReversibleChain, t: float, tail: float = TAIL_MASS) -> np.ndarray:
    """``exp(t L)`` by uniformization.

    With ``lam = max_x |L[x, x]|`` and ``P = I + L/lam``,
    ``exp(tL) = sum_n Poisson(lam t)[n] P^n``.  When ``lam t > 1`` the time
    is split into ``2^s`` equal pieces and the result squared ``s`` times;
    products of stochastic matrices stay stochastic and nonnegative.
    At least ``n - 1`` terms are kept so every reachable entry is positive
    with small relative error.
    """
    if t < 0:
        raise PreconditionError(f"time must be nonnegative, got {t!r}")
    n = chain.n
    if t == 0:
        return np.eye(n)
    L = chain.generator
    lam = float(np.max(-np.diag(L)))
    P = np.eye(n) + L / lam
    s = max(0, math.ceil(math.log2(lam * t))) if lam * t > 1 else 0
    tau = t / 2**s
    w = _poisson_truncation(lam * tau, n - 1, tail / 2**s)
    out = w[0] * np.eye(n)
    power = np.eye(n)
    for wn in w[1:]:
        power = power @ P
        out = out + wn * power
    for _ in range(s):
        out = out @ out
    return out


def endpoint_coupling(chain: ReversibleChain) -> EndpointKernel:
    """``R01[x, y] = m(x) p_1(x, y)``; symmetric by reversibility."""
    p1 = transition_kernel(chain, 1.0)
    with np.errstate(divide="ignore"):
        lm = np.log(chain.m.weights)[:, None] + np.log(p1)
    return EndpointKernel(lm)


def gaussian_grid_kernel(grid, k: float, base) -> EndpointKernel:
    """``R01[x, y] = base(x) base(y) exp(-k (x - y)^2 / 2)`` on a 1-D grid."""
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or np.any(np.diff(x) <= 0):
        raise PreconditionError("grid must be strictly increasing")
    if k < 0:
        raise PreconditionError("k must be nonnegative")
    b = np.asarray(base, dtype=float)
    if b.shape != x.shape or np.any(b <= 0):
        raise PreconditionError("base must be positive on the grid")
    lb = np.log(b)
    d2 = (x[:, None] - x[None, :]) ** 2
    return EndpointKernel(lb[:, None] + lb[None, :] - 0.5 * k * d2)


def slow_down(chain: ReversibleChain, k: float) -> ReversibleChain:
    """Generator ``L/k``; the reversing measure is unchanged."""
    if k <= 0:
        raise PreconditionError(f"slow-down factor must be positive, got {k!r}")
    if k == 1:
        return chain
    return ReversibleChain(RateGraph(chain.graph.states, chain.rates / k), chain.m)


def distance_matrix(graph: RateGraph) -> np.ndarray:
    """Hop-count distances on the undirected adjacency (exact integers)."""
    d = shortest_path(graph.adjacency.astype(float), directed=False, unweighted=True)
    return d.astype(np.int64)


def graph_distance(graph: RateGraph, x, y) -> int:
    """Shortest hop count between states ``x`` and ``y``."""
    return int(distance_matrix(graph)[graph.index(x), graph.index(y)])


def check_regenerative(chain: ReversibleChain, h: float = 0.5) -> dict:
    """Every state reaches every state at time ``h`` with positive probability."""
    p = transition_kernel(chain, h)
    zeros = [(chain.graph.states[i], chain.graph.states[j]) for i, j in np.argwhere(p <= 0)]
    return {"regenerative": not zeros, "zero_entries": zeros, "min_entry": float(p.min())}
