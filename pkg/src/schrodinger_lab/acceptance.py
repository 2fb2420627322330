"""Acceptance suite: one check per criterion, each returning a :class:`Criterion`.

Shared by ``tests/test_acceptance.py`` and the ``selftest`` subcommand.
Tolerances are pinned here and not adjusted per run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .entropy import additive_decomposition, relative_entropy, verify_variational_formula
from .interpolation import (
    action_value,
    build_path,
    current_equation_residual,
    entropy_convexity_check,
    hjb_residual,
    verify_disintegration,
    verify_markov_factorization,
)
from .markov import cycle_graph, endpoint_coupling, path_graph, random_reversible_chain, simple_random_walk
from .oracles import golden_section_two_state, w2_squared_half_1d
from .particles import SimulationConfig, condition_and_compare
from .schrodinger_system import blend_marginals, solve, verify_schrodinger_system
from .transport import entropic_midpoint_vs_displacement, gamma_sweep_gaussian, gamma_sweep_graph

N_INSTANCES = 20
SOLVE_TOL = 1e-10


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} {self.name}: {self.detail}"


def random_instance(seed: int):
    """Seeded random chain on ``2 + seed % 7`` states with full-support marginals.

    Marginals are Dirichlet draws blended half-and-half with the uniform law,
    keeping every mass away from zero.
    """
    rng = np.random.default_rng(seed)
    n = 2 + seed % 7
    chain = random_reversible_chain(n, rng)
    u = np.full(n, 1.0 / n)
    mu0 = blend_marginals(rng.dirichlet(np.ones(n)), u, 0.5)
    mu1 = blend_marginals(rng.dirichlet(np.ones(n)), u, 0.5)
    return chain, mu0, mu1


@lru_cache(maxsize=None)
def _solved(seed: int):
    chain, mu0, mu1 = random_instance(seed)
    t0 = time.perf_counter()
    sol = solve(chain, mu0, mu1, tol=SOLVE_TOL)
    return chain, mu0, mu1, sol, time.perf_counter() - t0


FIVE_NODE_SEEDS = tuple(s for s in range(N_INSTANCES) if 2 + s % 7 == 5)


@lru_cache(maxsize=None)
def _path(seed: int, grid: int):
    chain, _, _, sol, _ = _solved(seed)
    return build_path(chain, sol.potentials, grid)


def criterion_1() -> Criterion:
    worst_res, worst_it, worst_t = 0.0, 0, 0.0
    for s in range(N_INSTANCES):
        chain, mu0, mu1, sol, dt = _solved(s)
        res = verify_schrodinger_system(sol, chain, mu0, mu1)["residual"]
        worst_res, worst_it, worst_t = max(worst_res, res), max(worst_it, sol.iterations), max(worst_t, dt)
    ok = worst_res <= 1e-9 and worst_it <= 100_000 and worst_t < 1.0
    return Criterion(1, "Schrodinger-system residual", ok,
                     f"max residual {worst_res:.2e} (<= 1e-9), max sweeps {worst_it} (<= 100000), "
                     f"max runtime {worst_t:.3f}s (< 1s) over {N_INSTANCES} instances",
                     {"residual": worst_res, "iterations": worst_it, "runtime": worst_t})


def criterion_2() -> Criterion:
    gaps = [_solved(s)[3].duality_gap for s in range(N_INSTANCES)]
    worst = float(np.max(np.abs(gaps)))
    return Criterion(2, "duality", worst <= 1e-8,
                     f"max |primal - dual| {worst:.2e} (<= 1e-8)", {"gap": worst})


def two_state_instances(count: int = 30):
    """The 2-state instances of criterion 1 plus ``count`` further seeded ones,
    including point-mass marginals on the boundary of the polytope."""
    out = [random_instance(s) for s in range(N_INSTANCES) if 2 + s % 7 == 2]
    rng = np.random.default_rng(2024)
    for i in range(count):
        chain = random_reversible_chain(2, rng)
        mu0 = rng.dirichlet([1, 1])
        mu1 = np.array([1.0, 0.0]) if i % 10 == 0 else rng.dirichlet([1, 1])
        out.append((chain, mu0, mu1))
    return out


def criterion_3() -> Criterion:
    worst = 0.0
    insts = two_state_instances()
    for chain, mu0, mu1 in insts:
        sol = solve(chain, mu0, mu1, tol=SOLVE_TOL)
        ref = golden_section_two_state(endpoint_coupling(chain).matrix, mu0, mu1)
        worst = max(worst, float(np.max(np.abs(sol.coupling - ref))))
    return Criterion(3, "2-state golden-section oracle", worst <= 1e-8,
                     f"max entrywise gap {worst:.2e} (<= 1e-8) over {len(insts)} instances",
                     {"gap": worst})


def criterion_4(grid: int = 1000) -> Criterion:
    worst_born = worst_dis = 0.0
    for s in range(N_INSTANCES):
        chain, _, _, sol, _ = _solved(s)
        path = _path(s, grid)
        born = path.f * path.g * path.m[None, :]
        worst_born = max(worst_born, float(np.max(np.abs(born.sum(axis=1) - 1.0))))
        worst_dis = max(worst_dis, verify_disintegration(path, chain, sol.coupling))
    ok = worst_born <= 1e-9 and worst_dis <= 1e-9
    return Criterion(4, "Born formula and disintegration", ok,
                     f"max |mass(f_t g_t m) - 1| {worst_born:.2e}, max |f_t g_t m - bridge mixture| "
                     f"{worst_dis:.2e} (both <= 1e-9) at all {grid + 1} grid times",
                     {"born": worst_born, "disintegration": worst_dis})


def corrupt_coupling(coupling, mu0, mu1) -> np.ndarray:
    """Move mass around a 2x2 cycle on the heaviest rows/columns; marginals are kept."""
    pi = np.array(coupling, dtype=float)
    i = np.argsort(-np.asarray(mu0))[:2]
    j = np.argsort(-np.asarray(mu1))[:2]
    d = min(pi[i[0], j[1]], pi[i[1], j[0]])
    pi[i[0], j[0]] += d
    pi[i[1], j[1]] += d
    pi[i[0], j[1]] -= d
    pi[i[1], j[0]] -= d
    return pi


def criterion_5() -> Criterion:
    worst, weakest = 0.0, np.inf
    for s in range(N_INSTANCES):
        chain, mu0, mu1, sol, _ = _solved(s)
        worst = max(worst, verify_markov_factorization(None, chain, sol.coupling))
        bad = corrupt_coupling(sol.coupling, mu0, mu1)
        weakest = min(weakest, verify_markov_factorization(None, chain, bad))
    ok = worst <= 1e-9 and weakest > 1e-3
    return Criterion(5, "Markov factorization", ok,
                     f"max residual {worst:.2e} (<= 1e-9); corrupted control min residual "
                     f"{weakest:.2e} (> 1e-3)", {"residual": worst, "control": weakest})


def criterion_6() -> Criterion:
    ratios = []
    for s in FIVE_NODE_SEEDS:
        chain = _solved(s)[0]
        coarse, fine = _path(s, 1000), _path(s, 2000)
        ratios.append(hjb_residual(coarse, chain)["max"] / hjb_residual(fine, chain)["max"])
        ratios.append(current_equation_residual(coarse, chain)["max"]
                      / current_equation_residual(fine, chain)["max"])
    ok = all(3 <= r <= 5 for r in ratios)
    return Criterion(6, "HJB and current-equation refinement", ok,
                     f"residual ratios dt=1e-3 -> 5e-4 in [{min(ratios):.3f}, {max(ratios):.3f}] "
                     f"(required within [3, 5])", {"ratios": ratios})


def criterion_7() -> Criterion:
    gaps, shrinks = [], []
    for s in FIVE_NODE_SEEDS:
        chain, mu0, _, sol, _ = _solved(s)
        target = sol.primal_value - relative_entropy(mu0, chain.m.weights)
        g1 = abs(action_value(_path(s, 1000), chain) - target)
        g2 = abs(action_value(_path(s, 2000), chain) - target)
        gaps.append(g1)
        shrinks.append(g2 < g1)
    ok = max(gaps) <= 1e-4 and all(shrinks)
    return Criterion(7, "action identity", ok,
                     f"max |action - (primal - H(mu0|m))| {max(gaps):.2e} (<= 1e-4) at 1000 steps; "
                     f"gap shrinks at 2000 steps on {sum(shrinks)}/{len(shrinks)} graphs",
                     {"gaps": gaps})


def criterion_8() -> Criterion:
    rel, ratios, consts = [], [], []
    for s in FIVE_NODE_SEEDS:
        chain = _solved(s)[0]
        coarse = entropy_convexity_check(_path(s, 1000), chain, normalization=0.5)
        fine = entropy_convexity_check(_path(s, 2000), chain, normalization=0.5)
        rel.append(coarse["max_relative_mismatch"])
        consts.append(coarse["measured_constant"])
        # refinement of the finite difference against its own limit, read off the
        # corrected constant so the O(dt^2) order is visible independent of the 1/2
        c = entropy_convexity_check(_path(s, 1000), chain, normalization=1.0)["max_abs_mismatch"]
        f = entropy_convexity_check(_path(s, 2000), chain, normalization=1.0)["max_abs_mismatch"]
        ratios.append(c / f)
    ok = max(rel) <= 1e-3 and all(3 <= r <= 5 for r in ratios)
    return Criterion(8, "entropy convexity", ok,
                     f"max relative mismatch of h'' against 1/2<Theta2 phi + Theta2 psi, mu> "
                     f"{max(rel):.3e} (<= 1e-3); fitted constant {min(consts):.6f}..{max(consts):.6f} "
                     f"(formula uses 0.5); refinement ratios {min(ratios):.2f}..{max(ratios):.2f}",
                     {"relative": rel, "constants": consts, "ratios": ratios})


def criterion_9() -> Criterion:
    chain = simple_random_walk(4, path_graph(4))
    t0 = time.perf_counter()
    rep = gamma_sweep_graph(chain, [1, 0, 0, 0], [0, 0, 0, 1])
    dt = time.perf_counter() - t0
    ok = (abs(rep.mk_value - 3) < 1e-12 and rep.last_is_closest() and rep.cost_gaps[-1] < 0.05
          and dt < 30)
    vals = ", ".join(f"{v:.4f}" for v in rep.normalized_values)
    return Criterion(9, "Gamma-limit, graph case", ok,
                     f"normalized values [{vals}] -> mk {rep.mk_value:g}, last closest: "
                     f"{rep.last_is_closest()}; cost gap at k=1e6 {rep.cost_gaps[-1]:.2e} (< 0.05); "
                     f"runtime {dt:.2f}s (< 30s)", {"values": rep.normalized_values})


def gaussian_pair(n: int = 21, sigma: float = 0.1, centres=(0.25, 0.75)):
    x = np.linspace(0.0, 1.0, n)
    mus = [np.exp(-((x - c) ** 2) / (2 * sigma**2)) for c in centres]
    return x, mus[0] / mus[0].sum(), mus[1] / mus[1].sum()


def criterion_10() -> Criterion:
    x, mu0, mu1 = gaussian_pair()
    rep = gamma_sweep_gaussian(x, np.ones_like(x), mu0, mu1)
    w2 = w2_squared_half_1d(x, mu0, mu1)
    rel = abs(rep.normalized_values[-1] - w2) / w2
    tv = entropic_midpoint_vs_displacement(rep, x)
    mono = bool(np.all(np.diff(tv[-3:]) <= 0))
    ok = rel <= 0.10 and mono
    return Criterion(10, "Gamma-limit, quadratic case", ok,
                     f"normalized value at k={rep.k_values[-1]:g} {rep.normalized_values[-1]:.6f} vs "
                     f"W2^2/2 {w2:.6f} (relative {rel:.2e} <= 0.10); midpoint TV over last three k "
                     f"[{', '.join(f'{v:.2e}' for v in tv[-3:])}] non-increasing: {mono}",
                     {"relative": rel, "tv": tv.tolist()})


def criterion_11() -> Criterion:
    rng = np.random.default_rng(11)
    n = 6
    p = rng.dirichlet(np.ones(n))
    r = rng.uniform(0.2, 2.0, n)
    trials = [rng.normal(scale=2.0, size=n) for _ in range(100)]
    var = verify_variational_formula(p, r, trials)
    dec_worst = 0.0
    for _ in range(50):
        P = rng.dirichlet(np.ones(9)).reshape(3, 3)
        R = rng.uniform(0.1, 1.0, (3, 3))
        a, b = additive_decomposition(P, R)
        dec_worst = max(dec_worst, abs(a + b - relative_entropy(P, R)))
    ok = var["optimal_gap"] <= 1e-10 and var["bounds_hold"] and dec_worst <= 1e-10
    return Criterion(11, "entropy identities", ok,
                     f"variational gap at u* {var['optimal_gap']:.2e} (<= 1e-10); 100 lower bounds "
                     f"hold: {var['bounds_hold']}; additive decomposition max error {dec_worst:.2e} "
                     f"(<= 1e-10) on 50 3x3 joints", {"optimal_gap": var["optimal_gap"]})


PARTICLE_TARGET = np.array([0.3, 0.7 / 3, 0.7 / 3, 0.7 / 3])


def particle_setup(n: int = 200, epsilon: float = 0.05, seed: int = 7, batches: int = 100_000,
                   min_accepted: int | None = 50):
    chain = simple_random_walk(4, cycle_graph(4))
    mu0 = np.full(4, 0.25)
    sol = solve(chain, mu0, PARTICLE_TARGET, tol=1e-12)
    mid = build_path(chain, sol.potentials, 2).mu[1]
    cfg = SimulationConfig.from_profile(chain, n, mu0, PARTICLE_TARGET, epsilon, seed, batches,
                                        min_accepted=min_accepted)
    return cfg, sol, mid


def criterion_12() -> Criterion:
    t0 = time.perf_counter()
    cfg, sol, mid = particle_setup()
    rep = condition_and_compare(cfg, sol, mid, bootstrap=1000)
    dt = time.perf_counter() - t0
    se = rep.standard_errors["rate"]
    diff = abs(rep.rate_estimate - rep.reference_value)
    ok = rep.accepted >= 50 and rep.tv_to_interpolation <= 0.1 and diff <= 3 * se and dt < 120
    return Criterion(12, "particle lab", ok,
                     f"{rep.accepted} accepted of {rep.batches_run} batches; TV to mu_1/2 "
                     f"{rep.tv_to_interpolation:.4f} (<= 0.1); rate {rep.rate_estimate:.5f} vs reference "
                     f"{rep.reference_value:.5f}, |diff| {diff:.2e} vs 3 SE {3 * se:.2e}; "
                     f"runtime {dt:.1f}s (< 120s)", rep.to_dict())


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run(selected=None, stream=None) -> list[Criterion]:
    """Run the selected criteria (default all), printing one line each to ``stream``."""
    out = []
    for i in selected or sorted(CRITERIA):
        try:
            c = CRITERIA[i]()
        except Exception as exc:  # a crash is reported as a failure of that criterion
            c = Criterion(i, CRITERIA[i].__name__, False, f"raised {type(exc).__name__}: {exc}")
        out.append(c)
        if stream is not None:
            print(c.line(), file=stream, flush=True)
    return out
