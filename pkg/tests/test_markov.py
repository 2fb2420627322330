import numpy as np
import pytest
from scipy.linalg import expm

from schrodinger_lab.entropy import PreconditionError
from schrodinger_lab.markov import (
    EndpointKernel,
    GraphError,
    RateGraph,
    ReversibleChain,
    check_regenerative,
    cycle_graph,
    distance_matrix,
    endpoint_coupling,
    gaussian_grid_kernel,
    graph_distance,
    path_graph,
    random_reversible_chain,
    simple_random_walk,
    slow_down,
    transition_kernel,
)


def test_simple_random_walk_on_path(path3):
    assert list(path3.m.weights) == [1, 2, 1]
    J = path3.rates
    assert J[0, 1] == 1 and J[1, 0] == 0.5 and J[1, 2] == 0.5 and J[2, 1] == 1
    assert path3.balance_residual() == 0


def test_simple_random_walk_on_triangle(triangle):
    assert list(triangle.m.weights) == [2, 2, 2]
    off = triangle.rates[~np.eye(3, dtype=bool)]
    assert np.all(off == 0.5)


def test_cycle_balance_exact():
    c = simple_random_walk(4, cycle_graph(4))
    assert c.balance_residual() == 0.0


def test_construction_errors():
    with pytest.raises(GraphError):
        simple_random_walk(3, [(0, 1)])  # isolated vertex 2
    with pytest.raises(GraphError):
        simple_random_walk(4, [(0, 1), (2, 3)])  # disconnected
    with pytest.raises(GraphError):
        RateGraph((0, 1), np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(GraphError):
        RateGraph((0, 1), np.array([[1.0, 1.0], [1.0, 0.0]]))
    g = RateGraph((0, 1), np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(GraphError, match="detailed balance"):
        ReversibleChain(g, [1.0, 1.0])
    assert ReversibleChain(g, [2.0, 1.0]).balance_residual() == 0


def test_generator_rows_sum_to_zero(rng):
    c = random_reversible_chain(6, rng)
    L = c.generator
    off = L - np.diag(np.diag(L))
    assert np.array_equal(np.diag(L), -off.sum(axis=1))
    assert np.max(np.abs(L.sum(axis=1))) <= 1e-15


def test_kernel_at_zero_is_identity(triangle):
    assert np.array_equal(transition_kernel(triangle, 0.0), np.eye(3))


def test_two_state_analytic(two_state):
    for t in (0.1, 0.5, 1.0, 3.0):
        p = transition_kernel(two_state, t)
        assert p[0, 0] == pytest.approx((1 + np.exp(-2 * t)) / 2, abs=1e-14)


def test_negative_time_rejected(triangle):
    with pytest.raises(PreconditionError):
        transition_kernel(triangle, -0.1)


def test_kernel_against_scipy_expm(rng):
    for _ in range(5):
        c = random_reversible_chain(7, rng)
        for t in (0.01, 0.3, 1.0, 7.5):
            p = transition_kernel(c, t)
            assert np.all(p >= 0)
            assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-12
            assert np.max(np.abs(p - expm(t * c.generator))) <= 1e-12


def test_semigroup_and_reversibility(rng):
    c = random_reversible_chain(6, rng)
    m = c.m.weights
    for _ in range(10):
        s, t = rng.uniform(0, 1, 2)
        assert np.max(np.abs(transition_kernel(c, s) @ transition_kernel(c, t)
                             - transition_kernel(c, s + t))) <= 1e-10
        p = transition_kernel(c, t)
        assert np.max(np.abs(m[:, None] * p - (m[:, None] * p).T)) <= 1e-10


def test_endpoint_coupling(two_state, triangle, rng):
    K = endpoint_coupling(two_state)
    assert K.matrix[0, 0] == pytest.approx((1 + np.exp(-2)) / 2, abs=1e-14)
    assert np.allclose(K.matrix, K.matrix.T, rtol=1e-10, atol=0)
    Kt = endpoint_coupling(triangle)
    assert np.allclose(Kt.row_base.weights, triangle.m.weights, rtol=1e-12)
    assert np.allclose(Kt.col_base.weights, triangle.m.weights, rtol=1e-12)
    c = random_reversible_chain(8, rng)
    R = endpoint_coupling(c).matrix
    assert np.max(np.abs(R - R.T) / R) <= 1e-10
    assert np.all(R > 0)


def test_gaussian_grid_kernel():
    K = gaussian_grid_kernel([0.0, 1.0], 2.0, [1.0, 1.0])
    assert K.matrix[0, 1] == pytest.approx(np.exp(-1), rel=1e-15)
    K0 = gaussian_grid_kernel([0.0, 0.5, 1.0], 0.0, [1.0, 2.0, 3.0])
    assert np.allclose(K0.matrix, np.outer([1, 2, 3], [1, 2, 3]))
    base = np.array([0.5, 2.0, 3.0])
    K = gaussian_grid_kernel([0.0, 0.5, 1.0], 1e6, base)
    assert np.allclose(np.diag(K.log_matrix), 2 * np.log(base))
    assert np.all(np.isfinite(K.log_matrix))


def test_gaussian_log_linear_agreement():
    x = np.linspace(0, 1, 11)
    base = np.linspace(1, 2, 11)
    for k in (0.5, 5.0, 30.0):
        K = gaussian_grid_kernel(x, k, base)
        lin = np.outer(base, base) * np.exp(-k * (x[:, None] - x[None, :]) ** 2 / 2)
        assert np.max(np.abs(K.matrix / lin - 1)) <= 1e-12


def test_endpoint_kernel_bases():
    K = EndpointKernel(np.log(np.array([[1.0, 2.0], [3.0, 4.0]])))
    assert np.allclose(K.row_base.weights, [3, 7])
    assert np.allclose(K.col_base.weights, [4, 6])


def test_slow_down(path3):
    assert slow_down(path3, 1) is path3
    s = slow_down(path3, 2)
    assert np.allclose(s.rates, path3.rates / 2)
    assert np.array_equal(s.m.weights, path3.m.weights)
    for k in (3.0, 1e6):
        assert slow_down(path3, k).balance_residual() <= 1e-15
    with pytest.raises(PreconditionError):
        slow_down(path3, 0)


def test_graph_distance():
    c5 = simple_random_walk(5, cycle_graph(5))
    assert graph_distance(c5.graph, 0, 0) == 0
    assert graph_distance(c5.graph, 0, 2) == 2
    p4 = simple_random_walk(4, path_graph(4))
    assert graph_distance(p4.graph, 0, 3) == 3
    assert distance_matrix(p4.graph).dtype == np.int64


def test_regenerative(triangle, rng):
    assert check_regenerative(triangle)["regenerative"]
    rep = check_regenerative(triangle, h=1e-6)
    assert rep["regenerative"] and rep["min_entry"] > 0
    assert check_regenerative(random_reversible_chain(8, rng))["regenerative"]
