"""Monge-Kantorovich benchmarks and the slowing-down sweeps.

Slowing the reference down (``L -> L/k``) makes ``H(pi | R01^k) / alpha_k``
converge to the optimal transport cost: ``alpha_k = log k`` with graph-distance
cost for random walks, ``alpha_k = k`` with cost ``|x - y|^2 / 2`` for the
Gaussian kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from ._parallel import ordered_map
from .entropy import PreconditionError, as_probability, total_variation
from .markov import (ReversibleChain, distance_matrix, endpoint_coupling,
                     gaussian_grid_kernel, slow_down)
from .schrodinger_system import ConvergenceError, solve


@dataclass(frozen=True)
class TransportProblem:
    cost: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cost, dtype=float)
        mu0 = np.asarray(self.mu0, dtype=float)
        mu1 = np.asarray(self.mu1, dtype=float)
        if c.shape != (mu0.size, mu1.size):
            raise ValueError("cost shape does not match the marginals")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise PreconditionError("costs must be finite and nonnegative")
        if np.any(mu0 < 0) or np.any(mu1 < 0):
            raise PreconditionError("marginals must be nonnegative")
        if abs(mu0.sum() - mu1.sum()) > 1e-9:
            raise PreconditionError(f"marginal masses differ: {mu0.sum()!r} vs {mu1.sum()!r}")
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)


@dataclass(frozen=True)
class MKSolution:
    value: float
    coupling: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dual_value: float
    method: str
    exact_value: Fraction | None = None

    def slackness(self, cost) -> dict:
        c = np.asarray(cost, dtype=float)
        red = c - self.u[:, None] - self.v[None, :]
        sup = self.coupling > 0
        return {
            "dual_infeasibility": float(max(0.0, -red.min())),
            "support_slack": float(np.abs(red[sup]).max()) if sup.any() else 0.0,
            "duality_gap": abs(self.value - self.dual_value),
        }


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integers summing to ``total`` nearest to ``total * weights`` (largest remainder)."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    raw = w * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base


def _ssp_integer(cost, a, b):
    """Min-cost flow on the complete bipartite graph by successive shortest
    paths (Bellman-Ford), exact in Python integers.  Returns flow and duals."""
    n0, n1 = len(a), len(b)
    C = [[int(cost[i][j]) for j in range(n1)] for i in range(n0)]
    flow = [[0] * n1 for _ in range(n0)]
    supply = [int(x) for x in a]
    demand = [int(x) for x in b]
    INF = None
    while True:
        sources = [i for i in range(n0) if supply[i] > 0]
        if not sources:
            break
        # nodes 0..n0-1 left, n0..n0+n1-1 right
        dist = [INF] * (n0 + n1)
        prev = [None] * (n0 + n1)
        for i in sources:
            dist[i] = 0
        for _ in range(n0 + n1):
            changed = False
            for i in range(n0):
                if dist[i] is None:
                    continue
                for j in range(n1):
                    d = dist[i] + C[i][j]
                    if dist[n0 + j] is None or d < dist[n0 + j]:
                        dist[n0 + j], prev[n0 + j] = d, i
                        changed = True
            for j in range(n1):
                if dist[n0 + j] is None:
                    continue
                for i in range(n0):
                    if flow[i][j] > 0:
                        d = dist[n0 + j] - C[i][j]
                        if dist[i] is None or d < dist[i]:
                            dist[i], prev[i] = d, n0 + j
                            changed = True
            if not changed:
                break
        sinks = [j for j in range(n1) if demand[j] > 0 and dist[n0 + j] is not None]
        t = min(sinks, key=lambda j: (dist[n0 + j], j))
        # trace the path back to a source, collecting the bottleneck
        path = []
        node = n0 + t
        amount = demand[t]
        while True:
            p = prev[node]
            if p is None:
                break
            path.append((p, node))
            if node < n0:  # reverse arc j -> i reduces flow[i][j]
                amount = min(amount, flow[node][p - n0])
            node = p
        amount = min(amount, supply[node])
        for p, q in path:
            if q >= n0:
                flow[p][q - n0] += amount
            else:
                flow[q][p - n0] -= amount
        supply[node] -= amount
        demand[t] -= amount
    # feasible potentials for the final residual graph
    d = [0] * (n0 + n1)
    for _ in range(n0 + n1 + 1):
        changed = False
        for i in range(n0):
            for j in range(n1):
                if d[i] + C[i][j] < d[n0 + j]:
                    d[n0 + j] = d[i] + C[i][j]
                    changed = True
                if flow[i][j] > 0 and d[n0 + j] - C[i][j] < d[i]:
                    d[i] = d[n0 + j] - C[i][j]
                    changed = True
        if not changed:
            break
    else:
        raise RuntimeError("negative cycle in residual graph: flow is not optimal")
    u = [-d[i] for i in range(n0)]
    v = [d[n0 + j] for j in range(n1)]
    return flow, u, v


def _support_duals(cost, coupling, tol=1e-12):
    """Solve ``u_i + v_j = c_ij`` along the support of a basic coupling."""
    n0, n1 = coupling.shape
    u = np.full(n0, np.nan)
    v = np.full(n1, np.nan)
    sup = coupling > tol
    for root in range(n0):
        if not np.isnan(u[root]) or not sup[root].any():
            continue
        u[root] = 0.0
        stack = [("u", root)]
        while stack:
            side, k = stack.pop()
            if side == "u":
                for j in np.flatnonzero(sup[k] & np.isnan(v)):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("v", j))
            else:
                for i in np.flatnonzero(sup[:, k] & np.isnan(u)):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("u", i))
    if np.isnan(u).any() or np.isnan(v).any():
        return None
    return u, v


def _lp(problem: TransportProblem) -> MKSolution:
    c, a, b = problem.cost, problem.mu0, problem.mu1
    n0, n1 = c.shape
    A = np.zeros((n0 + n1, n0 * n1))
    for i in range(n0):
        A[i, i * n1:(i + 1) * n1] = 1.0
    for j in range(n1):
        A[n0 + j, j::n1] = 1.0
    res = linprog(c.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None),
                  method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    pi = np.maximum(res.x.reshape(n0, n1), 0.0)
    y = res.eqlin.marginals
    candidates = [(y[:n0], y[n0:])]
    polished = _support_duals(c, pi)
    if polished is not None:
        candidates.append(polished)

    def violation(uv):
        u, v = uv
        red = c - u[:, None] - v[None, :]
        return max(0.0, -red.min()) + (np.abs(red[pi > 1e-12]).max() if (pi > 1e-12).any() else 0)

    u, v = min(candidates, key=violation)
    value = float(np.sum(c * pi))
    return MKSolution(value, pi, u, v, float(u @ a + v @ b), "lp")


def mk_solve(problem: TransportProblem, denominator: int = 10**6, method: str = "auto") -> MKSolution:
    """Optimal transport value and coupling.

    Integer costs (e.g. graph distances) use exact successive-shortest-path
    min-cost flow after rounding the marginals to multiples of
    ``1/denominator``; real costs use the HiGHS LP with duals certified by
    complementary slackness.
    """
    c = problem.cost
    integer = np.all(c == np.round(c))
    if method == "lp" or (method == "auto" and not integer):
        return _lp(problem)
    if not integer:
        raise PreconditionError("integer method needs integer costs")
    a = largest_remainder(problem.mu0, denominator)
    b = largest_remainder(problem.mu1, denominator)
    flow, u, v = _ssp_integer(np.round(c).astype(np.int64), a, b)
    total = sum(int(c[i, j]) * flow[i][j] for i in range(len(a)) for j in range(len(b)))
    dual = sum(u[i] * int(a[i]) for i in range(len(a))) + sum(v[j] * int(b[j]) for j in range(len(b)))
    if dual != total:
        raise RuntimeError("integer min-cost flow failed its duality certificate")
    exact = Fraction(total, denominator)
    scale = problem.mu0.sum()
    return MKSolution(float(exact) * scale, np.array(flow, dtype=float) / denominator * scale,
                      np.array(u, dtype=float), np.array(v, dtype=float),
                      float(Fraction(dual, denominator)) * scale, "integer", exact)


def monotone_coupling_1d(x, mu0, y, mu1) -> np.ndarray:
    """North-west-corner coupling of the sorted supports: the quantile coupling,
    optimal on the line for any convex function of ``y - x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    a, b = np.asarray(mu0, float).copy(), np.asarray(mu1, float).copy()
    ix, iy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    pi = np.zeros((x.size, y.size))
    i = j = 0
    while i < x.size and j < y.size:
        if a[ix[i]] <= 0:
            i += 1
            continue
        if b[iy[j]] <= 0:
            j += 1
            continue
        q = min(a[ix[i]], b[iy[j]])
        pi[ix[i], iy[j]] += q
        a[ix[i]] -= q
        b[iy[j]] -= q
        if a[ix[i]] <= 1e-15:
            i += 1
        if b[iy[j]] <= 1e-15:
            j += 1
    return pi


@dataclass
class GammaSweepReport:
    k_values: list
    normalized_values: list
    couplings: list
    cost_gaps: list
    mk_value: float
    mk_coupling: np.ndarray
    speed: str
    iterations: list = field(default_factory=list)
    midpoints: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def distances_to_limit(self) -> np.ndarray:
        return np.abs(np.array(self.normalized_values) - self.mk_value)

    def last_is_closest(self) -> bool:
        d = self.distances_to_limit()
        return bool(d[-1] <= d.min())

    def gap_improves(self) -> bool:
        return bool(self.cost_gaps[-1] <= self.cost_gaps[0] + 1e-12)

    def records(self) -> list[dict]:
        return [{"k": k, "normalized_value": nv, "cost_gap": g}
                for k, nv, g in zip(self.k_values, self.normalized_values, self.cost_gaps)]


def _check_ks(k_values):
    ks = [float(k) for k in k_values]
    if any(k < 2 for k in ks):
        raise PreconditionError("slow-down factors must be at least 2")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise PreconditionError("k values must be strictly increasing")
    return ks


class SweepError(RuntimeError):
    def __init__(self, k, cause):
        super().__init__(f"solver failed at k={k:g}: {cause}")
        self.k = k
        self.cause = cause


def _collect(ks, results, record_failures):
    out, failures = [], {}
    for k, r in zip(ks, results):
        if isinstance(r, ConvergenceError):
            if not record_failures:
                raise SweepError(k, r)
            failures[k] = str(r)
        else:
            out.append((k, r))
    return out, failures


DEFAULT_K = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)


def gamma_sweep_graph(chain: ReversibleChain, mu0, mu1, k_values=DEFAULT_K, tol: float = 1e-10,
                      max_iter: int = 100_000, record_failures: bool = False,
                      workers: int | None = None) -> GammaSweepReport:
    """Solve the slowed problems on the graph and compare ``H / log k`` with the
    graph-distance transport cost."""
    ks = _check_ks(k_values)
    mu0 = as_probability(mu0, atol=1e-9)
    mu1 = as_probability(mu1, atol=1e-9)
    cost = distance_matrix(chain.graph).astype(float)
    mk = mk_solve(TransportProblem(cost, mu0, mu1))

    def one(k):
        try:
            return solve(endpoint_coupling(slow_down(chain, k)), mu0, mu1, tol, max_iter)
        except ConvergenceError as exc:
            return exc

    done, failures = _collect(ks, ordered_map(one, ks, workers), record_failures)
    return GammaSweepReport(
        k_values=[k for k, _ in done],
        normalized_values=[s.primal_value / np.log(k) for k, s in done],
        couplings=[s.coupling for _, s in done],
        cost_gaps=[float(np.sum(cost * s.coupling)) - mk.value for _, s in done],
        mk_value=mk.value, mk_coupling=mk.coupling, speed="log k",
        iterations=[s.iterations for _, s in done], failures=failures,
    )


def bridge_midpoint_gaussian(grid, base, k: float, coupling) -> np.ndarray:
    """Time-1/2 marginal of the Gaussian-bridge mixture on the grid:
    mass ``pi[x, y]`` spread over ``z`` with weight
    ``base(z) exp(-k ((z - x)^2 + (y - z)^2))``."""
    x = np.asarray(grid, float)
    lb = np.log(np.asarray(base, float))
    pi = np.asarray(coupling, float)
    out = np.zeros(x.size)
    for i, j in zip(*np.nonzero(pi > 0)):
        lw = lb - k * ((x - x[i]) ** 2 + (x[j] - x) ** 2)
        out += pi[i, j] * np.exp(lw - logsumexp(lw))
    return out


def gamma_sweep_gaussian(grid, base, mu0, mu1, k_values=(1e1, 1e2, 1e3, 1e4), tol: float = 1e-10,
                         max_iter: int = 100_000, record_failures: bool = False,
                         workers: int | None = None) -> GammaSweepReport:
    """Solve the Gaussian-kernel problems on a 1-D grid and compare ``H / k``
    with the quadratic transport cost ``|x - y|^2 / 2``.

    Midpoints of the entropic interpolation are stored for comparison with
    the displacement interpolation.
    """
    ks = _check_ks(k_values)
    x = np.asarray(grid, float)
    mu0 = as_probability(mu0, atol=1e-9)
    mu1 = as_probability(mu1, atol=1e-9)
    cost = 0.5 * (x[:, None] - x[None, :]) ** 2
    mk = mk_solve(TransportProblem(cost, mu0, mu1))

    def one(k):
        try:
            return solve(gaussian_grid_kernel(x, k, base), mu0, mu1, tol, max_iter)
        except ConvergenceError as exc:
            return exc

    done, failures = _collect(ks, ordered_map(one, ks, workers), record_failures)
    return GammaSweepReport(
        k_values=[k for k, _ in done],
        normalized_values=[s.primal_value / k for k, s in done],
        couplings=[s.coupling for _, s in done],
        cost_gaps=[float(np.sum(cost * s.coupling)) - mk.value for _, s in done],
        mk_value=mk.value, mk_coupling=mk.coupling, speed="k",
        iterations=[s.iterations for _, s in done],
        midpoints=[bridge_midpoint_gaussian(x, base, k, s.coupling) for k, s in done],
        failures=failures,
    )


def displacement_midpoint(grid, coupling) -> np.ndarray:
    """Push ``coupling`` forward by ``(x, y) -> (x + y)/2`` and snap to the grid.

    A midpoint equidistant from two grid points is split equally between them.
    """
    x = np.asarray(grid, float)
    pi = np.asarray(coupling, float)
    out = np.zeros(x.size)
    for i, j in zip(*np.nonzero(pi > 0)):
        d = np.abs(x - 0.5 * (x[i] + x[j]))
        near = np.flatnonzero(d <= d.min() + 1e-12 * max(1.0, np.abs(x).max()))
        out[near] += pi[i, j] / near.size
    return out


def entropic_midpoint_vs_displacement(report: GammaSweepReport, grid) -> np.ndarray:
    """Total-variation distance from each stored entropic midpoint to the
    displacement midpoint of the monotone coupling."""
    x = np.asarray(grid, float)
    mu0 = report.mk_coupling.sum(axis=1)
    mu1 = report.mk_coupling.sum(axis=0)
    target = displacement_midpoint(x, monotone_coupling_1d(x, mu0, x, mu1))
    return np.array([total_variation(mid, target) for mid in report.midpoints])
