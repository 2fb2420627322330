import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schrodinger_lab.entropy import PreconditionError, total_variation
from schrodinger_lab.markov import cycle_graph, distance_matrix, path_graph, simple_random_walk
from schrodinger_lab.oracles import w2_squared_half_1d
from schrodinger_lab.transport import (
    SweepError,
    TransportProblem,
    displacement_midpoint,
    entropic_midpoint_vs_displacement,
    gamma_sweep_gaussian,
    gamma_sweep_graph,
    largest_remainder,
    mk_solve,
    monotone_coupling_1d,
)


def test_identical_marginals_cost_zero():
    c = distance_matrix(simple_random_walk(5, cycle_graph(5)).graph)
    mu = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    sol = mk_solve(TransportProblem(c, mu, mu))
    assert sol.value == 0.0
    assert np.allclose(sol.coupling, np.diag(mu))


def test_point_masses():
    c = distance_matrix(simple_random_walk(5, path_graph(5)).graph)
    sol = mk_solve(TransportProblem(c, np.eye(5)[0], np.eye(5)[3]))
    assert sol.value == 3.0 and sol.exact_value == 3


def test_unequal_masses_rejected():
    with pytest.raises(PreconditionError, match="masses differ"):
        TransportProblem(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.6])


def test_largest_remainder():
    out = largest_remainder([1 / 3, 1 / 3, 1 / 3], 10)
    assert out.sum() == 10 and sorted(out) == [3, 3, 4]


def test_quadratic_line_matches_monotone(rng):
    x = np.linspace(0, 1, 15)
    cost = 0.5 * (x[:, None] - x[None, :]) ** 2
    for _ in range(10):
        a = rng.dirichlet(np.ones(15))
        b = rng.dirichlet(np.ones(15))
        sol = mk_solve(TransportProblem(cost, a, b))
        assert sol.method == "lp"
        assert sol.value == pytest.approx(w2_squared_half_1d(x, a, b), abs=1e-9)
        slack = sol.slackness(cost)
        assert slack["duality_gap"] <= 1e-9
        assert slack["support_slack"] <= 1e-9 and slack["dual_infeasibility"] <= 1e-9


def test_monotone_coupling_marginals(rng):
    x = np.sort(rng.uniform(size=8))
    a, b = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
    pi = monotone_coupling_1d(x, a, x, b)
    assert np.allclose(pi.sum(axis=1), a) and np.allclose(pi.sum(axis=0), b)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_integer_flow_agrees_with_lp(n0, n1, seed):
    rng = np.random.default_rng(seed)
    cost = rng.integers(0, 6, size=(n0, n1)).astype(float)
    a = largest_remainder(rng.dirichlet(np.ones(n0)), 1000) / 1000
    b = largest_remainder(rng.dirichlet(np.ones(n1)), 1000) / 1000
    p = TransportProblem(cost, a, b)
    exact = mk_solve(p)
    lp = mk_solve(p, method="lp")
    assert exact.method == "integer"
    assert exact.value == pytest.approx(lp.value, abs=1e-9)
    assert exact.dual_value == pytest.approx(exact.value, abs=1e-12)
    assert np.allclose(exact.coupling.sum(axis=1), a) and np.allclose(exact.coupling.sum(axis=0), b)
    assert exact.slackness(cost)["support_slack"] <= 1e-9


def _check_report(rep, mu0, mu1):
    for pi in rep.couplings:
        assert total_variation(pi.sum(axis=1), mu0) <= 1e-8
        assert total_variation(pi.sum(axis=0), mu1) <= 1e-8
    assert min(rep.cost_gaps) >= -1e-10


def test_graph_sweep_path4():
    chain = simple_random_walk(4, path_graph(4))
    mu0, mu1 = np.eye(4)[0], np.eye(4)[3]
    rep = gamma_sweep_graph(chain, mu0, mu1)
    assert rep.mk_value == 3
    assert np.all(np.diff(rep.normalized_values) < 0)
    assert min(rep.normalized_values) > 3
    assert rep.last_is_closest() and rep.gap_improves()
    _check_report(rep, mu0, mu1)


def test_graph_sweep_equal_marginals_trend():
    chain = simple_random_walk(4, path_graph(4))
    mu = np.array([0.1, 0.2, 0.3, 0.4])
    rep = gamma_sweep_graph(chain, mu, mu, k_values=(10, 100, 1000))
    assert rep.mk_value == 0
    d = rep.distances_to_limit()
    assert d[0] > d[1] > d[2]
    _check_report(rep, mu, mu)


def test_graph_sweep_large_k_failure_is_reported():
    # near-diagonal kernels make IPF contract very slowly at tight tolerance
    chain = simple_random_walk(4, path_graph(4))
    mu = np.array([0.1, 0.2, 0.3, 0.4])
    with pytest.raises(SweepError) as err:
        gamma_sweep_graph(chain, mu, mu, k_values=(10, 1e4), max_iter=2000)
    assert err.value.k == 1e4
    rep = gamma_sweep_graph(chain, mu, mu, k_values=(10, 1e4), max_iter=2000, record_failures=True)
    assert rep.k_values == [10.0] and 1e4 in rep.failures


def test_cycle_selection_is_symmetric():
    chain = simple_random_walk(4, cycle_graph(4))
    mu0 = np.array([0.5, 0, 0.5, 0])
    mu1 = np.array([0, 0.5, 0, 0.5])
    rep = gamma_sweep_graph(chain, mu0, mu1)
    assert rep.mk_value == 1
    pi = rep.couplings[-1]
    # reflection of the cycle fixing 0 and 2 and exchanging the two sides
    s = np.array([0, 3, 2, 1])
    assert np.max(np.abs(pi - pi[np.ix_(s, s)])) <= 1e-9
    assert np.max(np.abs(pi[np.ix_([0, 2], [1, 3])] - 0.25)) <= 1e-9
    assert abs(rep.cost_gaps[-1]) <= 1e-9


def test_gaussian_two_point():
    x = np.linspace(0, 1, 5)
    mu0, mu1 = np.eye(5)[0], np.eye(5)[4]
    rep = gamma_sweep_gaussian(x, np.ones(5), mu0, mu1)
    assert rep.mk_value == pytest.approx(0.5)
    assert np.allclose(rep.normalized_values, 0.5)
    target = displacement_midpoint(x, monotone_coupling_1d(x, mu0, x, mu1))
    assert np.array_equal(target, np.eye(5)[2])
    tv = entropic_midpoint_vs_displacement(rep, x)
    assert np.all(np.diff(tv) <= 0) and tv[0] > tv[-1]


def test_gaussian_equal_marginals_trend():
    x = np.linspace(0, 1, 21)
    g = np.exp(-((x - 0.5) ** 2) / (2 * 0.1**2))
    mu = g / g.sum()
    rep = gamma_sweep_gaussian(x, np.ones(21), mu, mu, k_values=(10, 100, 1000))
    assert rep.mk_value == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(np.abs(rep.normalized_values)) < 0)
    # the entropic midpoint of mu -> mu is not mu at finite k; it converges to it
    tv = entropic_midpoint_vs_displacement(rep, x)
    assert np.all(np.diff(tv) < 0) and tv[-1] < 1e-4


def test_gaussian_pair_approach():
    x = np.linspace(0, 1, 21)
    g = lambda c: np.exp(-((x - c) ** 2) / (2 * 0.1**2))
    mu0, mu1 = g(0.25) / g(0.25).sum(), g(0.75) / g(0.75).sum()
    rep = gamma_sweep_gaussian(x, np.ones(21), mu0, mu1)
    w2 = w2_squared_half_1d(x, mu0, mu1)
    assert rep.mk_value == pytest.approx(w2, abs=1e-9)
    d = rep.distances_to_limit()
    assert np.all(np.diff(d) < 0)
    _check_report(rep, mu0, mu1)


def test_displacement_midpoint_tie_split():
    x = np.linspace(0, 1, 5)
    pi = np.zeros((5, 5))
    pi[0, 1] = 1.0  # midpoint 0.125 sits halfway between grid points 0 and 0.25
    assert np.allclose(displacement_midpoint(x, pi), [0.5, 0.5, 0, 0, 0])


def test_sweep_preconditions():
    chain = simple_random_walk(4, path_graph(4))
    with pytest.raises(PreconditionError):
        gamma_sweep_graph(chain, np.eye(4)[0], np.eye(4)[3], k_values=(10, 5))
    with pytest.raises(PreconditionError):
        gamma_sweep_graph(chain, np.eye(4)[0], np.eye(4)[3], k_values=(1, 10))


def test_sweep_independent_of_workers():
    chain = simple_random_walk(4, path_graph(4))
    a = gamma_sweep_graph(chain, np.eye(4)[0], np.eye(4)[3], workers=1)
    b = gamma_sweep_graph(chain, np.eye(4)[0], np.eye(4)[3], workers=4)
    assert a.normalized_values == b.normalized_values
