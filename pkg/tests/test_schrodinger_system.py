import numpy as np
import pytest

from schrodinger_lab.acceptance import random_instance
from schrodinger_lab.entropy import PreconditionError, relative_entropy
from schrodinger_lab.markov import EndpointKernel, endpoint_coupling, random_reversible_chain
from schrodinger_lab.oracles import golden_section_two_state
from schrodinger_lab.schrodinger_system import (
    ConvergenceError,
    blend_marginals,
    dual_objective,
    dual_value,
    solve,
    verify_schrodinger_system,
)


def test_uniform_marginals_on_triangle(triangle):
    m = triangle.m.weights
    u = m / m.sum()
    sol = solve(triangle, u, u)
    assert sol.primal_value == pytest.approx(-np.log(6), abs=1e-12)
    assert np.allclose(sol.potentials.f0, 1 / np.sqrt(6), rtol=1e-12)
    assert np.allclose(sol.potentials.g1, 1 / np.sqrt(6), rtol=1e-12)
    assert np.allclose(sol.coupling, endpoint_coupling(triangle).matrix / 6, atol=1e-15)
    assert sol.dual_value == pytest.approx(-np.log(6), abs=1e-12)
    assert verify_schrodinger_system(sol, triangle, u, u)["residual"] <= 1e-12


def test_point_masses(five_node):
    chain = five_node[0]
    R = endpoint_coupling(chain).matrix
    a = 2
    d = np.eye(chain.n)[a]
    sol = solve(chain, d, d)
    expect = np.zeros((chain.n, chain.n))
    expect[a, a] = 1
    assert np.allclose(sol.coupling, expect, atol=1e-15)
    assert sol.primal_value == pytest.approx(-np.log(R[a, a]), abs=1e-12)
    assert sol.dual_value == pytest.approx(-np.log(R[a, a]), abs=1e-12)
    assert verify_schrodinger_system(sol, chain, d, d)["residual"] <= 1e-12
    # support matching
    assert np.count_nonzero(sol.potentials.f0) == 1
    assert np.count_nonzero(sol.potentials.g1) == 1


def test_two_state_golden_section(two_state):
    mu0, mu1 = [0.5, 0.5], [0.9, 0.1]
    sol = solve(two_state, mu0, mu1)
    ref = golden_section_two_state(endpoint_coupling(two_state).matrix, mu0, mu1)
    assert np.max(np.abs(sol.coupling - ref)) <= 1e-8


def test_random_instances_invariants():
    for seed in range(10):
        chain, mu0, mu1 = random_instance(seed)
        K = endpoint_coupling(chain)
        sol = solve(K, mu0, mu1, tol=1e-12)
        f0, g1 = sol.potentials.f0, sol.potentials.g1
        assert float(f0 @ K.matrix @ g1) == pytest.approx(1.0, abs=1e-10)
        prod = f0[:, None] * g1[None, :] * K.matrix
        assert np.max(np.abs(prod / sol.coupling - 1)) <= 1e-12
        assert np.max(np.abs(sol.coupling.sum(axis=1) - mu0)) <= 1e-12
        assert np.max(np.abs(sol.coupling.sum(axis=0) - mu1)) <= 1e-15
        assert sol.primal_value == pytest.approx(relative_entropy(sol.coupling, K.matrix), abs=1e-10)
        assert abs(sol.duality_gap) <= 1e-8
        assert np.all(np.diff(sol.residual_history) <= 1e-13)
        if chain.n == 5:
            assert verify_schrodinger_system(sol, chain, mu0, mu1)["residual"] <= 1e-11


def test_gauge_invariance(five_node):
    chain, mu0, mu1 = five_node
    K = endpoint_coupling(chain)
    sol = solve(K, mu0, mu1)
    for c in (1e-3, 0.5, 7.0):
        pots = sol.potentials.regauged(c)
        assert np.allclose(pots.f0, c * sol.potentials.f0, rtol=1e-14)
        coupling = pots.f0[:, None] * pots.g1[None, :] * K.matrix
        assert np.allclose(coupling, sol.coupling, rtol=1e-13, atol=0)
        assert dual_value(pots, K, mu0, mu1) == pytest.approx(sol.dual_value, abs=1e-13)


def test_uniqueness_from_other_start(five_node):
    chain, mu0, mu1 = five_node
    a = solve(chain, mu0, mu1)
    b = solve(chain, mu0, mu1, log_g1_init=np.random.default_rng(0).normal(scale=3, size=chain.n))
    assert np.max(np.abs(a.coupling - b.coupling)) <= 1e-8


def test_swap_symmetry(five_node):
    chain, mu0, mu1 = five_node
    a = solve(chain, mu0, mu1, tol=1e-12)
    b = solve(chain, mu1, mu0, tol=1e-12)
    assert np.max(np.abs(a.coupling - b.coupling.T)) <= 1e-10


def test_weak_duality(five_node):
    chain, mu0, mu1 = five_node
    K = endpoint_coupling(chain)
    sol = solve(K, mu0, mu1)
    rng = np.random.default_rng(4)
    for _ in range(50):
        phi, psi = rng.normal(size=(2, chain.n))
        assert dual_objective(phi, psi, K, mu0, mu1) <= sol.primal_value + 1e-12


def test_dual_infinite_when_potential_vanishes(five_node):
    chain, mu0, mu1 = five_node
    phi = np.zeros(chain.n)
    phi[0] = -np.inf
    assert dual_objective(phi, np.zeros(chain.n), endpoint_coupling(chain), mu0, mu1) == -np.inf


def test_support_violation_names_state():
    with np.errstate(divide="ignore"):
        K = EndpointKernel(np.log(np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])))
    with pytest.raises(PreconditionError, match="state 2"):
        solve(K, [0.4, 0.4, 0.2], [0.5, 0.5, 0.0])


def test_non_convergence_carries_residual(rng):
    chain = random_reversible_chain(6, rng)
    mu0 = rng.dirichlet(np.ones(6))
    mu1 = rng.dirichlet(np.ones(6))
    with pytest.raises(ConvergenceError) as err:
        solve(chain, mu0, mu1, tol=1e-15, max_iter=2)
    assert err.value.iterations == 2
    assert err.value.residual > 0


def test_zero_mass_states_are_excised(five_node):
    chain, mu0, mu1 = five_node
    mu0 = mu0.copy()
    mu0[1] = 0
    mu0 /= mu0.sum()
    sol = solve(chain, mu0, mu1)
    assert sol.potentials.f0[1] == 0.0
    assert sol.potentials.log_f0[1] == -np.inf
    assert np.all(sol.coupling[1] == 0)
    assert abs(sol.duality_gap) <= 1e-8


def test_blend_marginals():
    out = blend_marginals([1.0, 0.0, 0.0], np.full(3, 1 / 3), 0.3)
    assert np.allclose(out, [0.8, 0.1, 0.1])
    for eps in (0.0, 1.0):
        with pytest.raises(PreconditionError):
            blend_marginals([1.0, 0.0], [0.5, 0.5], eps)
    assert np.all(blend_marginals([1.0, 0.0, 0.0], np.full(3, 1 / 3), 1e-9) > 0)
