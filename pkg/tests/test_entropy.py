import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schrodinger_lab.entropy import (
    Measure,
    PreconditionError,
    additive_decomposition,
    as_probability,
    pushforward,
    relative_entropy,
    total_variation,
    verify_variational_formula,
)


def test_equal_measures_have_zero_entropy():
    assert relative_entropy([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_unnormalised_reference_gives_negative_value():
    assert relative_entropy([0.5, 0.5], [1.0, 1.0]) == pytest.approx(-np.log(2), abs=1e-15)


def test_direct_sum_matches_variational_optimum():
    p, r = np.array([0.3, 0.7]), np.array([0.5, 0.5])
    direct = 0.3 * np.log(0.6) + 0.7 * np.log(1.4)
    h = relative_entropy(p, r)
    assert h == pytest.approx(direct, abs=1e-15)
    assert h == pytest.approx(0.0822, abs=1e-4)
    rep = verify_variational_formula(p, r, [])
    assert rep["optimal_gap"] <= 1e-10


def test_absolute_continuity_failure_is_infinite():
    assert relative_entropy([0.5, 0.5], [1.0, 0.0]) == np.inf
    assert relative_entropy([0.0, 1.0], [0.0, 1.0]) == 0.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        relative_entropy([0.5, 0.5], [1 / 3] * 3)


def test_matrix_inputs():
    p = np.array([[0.25, 0.25], [0.5, 0.0]])
    r = np.full((2, 2), 0.25)
    assert relative_entropy(p, r) == pytest.approx(0.5 * np.log(2), abs=1e-15)


def test_measure_and_probability_checks():
    m = Measure([1.0, 2.0, 0.0])
    assert m.total_mass == 3.0
    assert not m.is_probability
    assert m.normalized().is_probability
    assert list(m.support()) == [True, True, False]
    with pytest.raises(ValueError):
        Measure([1.0, -1.0])
    with pytest.raises(PreconditionError):
        as_probability([0.5, 0.6])


def test_variational_uniform_zero_trial():
    rep = verify_variational_formula([0.25] * 4, [0.25] * 4, [np.zeros(4)])
    assert rep["bounds"][0] == pytest.approx(0.0, abs=1e-15)
    assert rep["entropy"] == 0.0


def test_variational_random_lower_bounds():
    rng = np.random.default_rng(5)
    p = rng.dirichlet(np.ones(5))
    r = rng.uniform(0.1, 3.0, 5)
    rep = verify_variational_formula(p, r, [rng.normal(scale=3, size=5) for _ in range(100)])
    assert rep["bounds_hold"]
    assert rep["max_violation"] <= 1e-10
    assert rep["optimal_gap"] <= 1e-10


def test_variational_requires_absolute_continuity():
    with pytest.raises(PreconditionError):
        verify_variational_formula([0.5, 0.5], [1.0, 0.0], [])


def test_variational_with_partial_support():
    rep = verify_variational_formula([0.0, 0.4, 0.6], [1.0, 1.0, 2.0], [np.zeros(3)])
    assert rep["optimal_gap"] <= 1e-12
    assert rep["bounds_hold"]


def test_additive_decomposition_product():
    a = np.array([0.2, 0.8])
    b = np.array([0.6, 0.4])
    P = np.outer(a, b)
    assert additive_decomposition(P, P) == (0.0, 0.0)


def test_additive_decomposition_reweighted_marginal():
    rng = np.random.default_rng(3)
    R = rng.uniform(0.1, 1.0, (3, 4))
    a = rng.dirichlet(np.ones(3))
    P = a[:, None] * R / R.sum(axis=1, keepdims=True)
    marginal, conditional = additive_decomposition(P, R)
    assert conditional == pytest.approx(0.0, abs=1e-15)
    assert marginal == pytest.approx(relative_entropy(P, R), abs=1e-12)


def test_additive_decomposition_random_joints():
    rng = np.random.default_rng(8)
    for _ in range(20):
        P = rng.dirichlet(np.ones(9)).reshape(3, 3)
        R = rng.uniform(0.1, 1.0, (3, 3))
        a, b = additive_decomposition(P, R)
        assert a + b == pytest.approx(relative_entropy(P, R), abs=1e-10)
        assert b >= 0


def test_additive_decomposition_zero_fibres():
    P = np.array([[0.0, 0.0], [0.5, 0.5]])
    R = np.array([[0.0, 0.0], [0.5, 0.5]])
    assert additive_decomposition(P, R) == (0.0, 0.0)
    P2 = np.array([[0.5, 0.0], [0.0, 0.5]])
    R2 = np.array([[0.0, 0.0], [0.5, 0.5]])
    assert additive_decomposition(P2, R2)[0] == np.inf
    # a fibre of r with zero mass inside a charged row
    P3 = np.array([[0.5, 0.5], [0.0, 0.0]])
    R3 = np.array([[1.0, 0.0], [0.5, 0.5]])
    assert additive_decomposition(P3, R3)[1] == np.inf


probs = st.integers(2, 6).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n),
        st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n),
        st.lists(st.floats(0.05, 5.0), min_size=n, max_size=n),
        st.floats(0.05, 0.95),
    )
)


@settings(max_examples=100, deadline=None)
@given(probs)
def test_strict_convexity(data):
    p, q, r, lam = data
    p = np.array(p) / sum(p)
    q = np.array(q) / sum(q)
    r = np.array(r)
    if total_variation(p, q) < 1e-3:
        return
    mix = relative_entropy(lam * p + (1 - lam) * q, r)
    assert mix < lam * relative_entropy(p, r) + (1 - lam) * relative_entropy(q, r) - 1e-12


@settings(max_examples=100, deadline=None)
@given(probs)
def test_weight_coherence(data):
    p, w, r, _ = data
    p = np.array(p) / sum(p)
    W = np.array(w) * 3
    r = np.array(r)
    z = float(np.exp(-W) @ r)
    rW = np.exp(-W) * r / z
    assert relative_entropy(p, r) == pytest.approx(relative_entropy(p, rW) - W @ p - np.log(z), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(probs, st.integers(0, 10_000))
def test_data_processing(data, seed):
    p, _, r, _ = data
    p = np.array(p) / sum(p)
    r = np.array(r)
    labels = np.random.default_rng(seed).integers(0, 2, size=p.size)
    assert relative_entropy(pushforward(p, labels, 2), pushforward(r, labels, 2)) <= relative_entropy(p, r) + 1e-12
