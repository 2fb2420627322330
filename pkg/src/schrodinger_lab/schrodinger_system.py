"""Static Schrödinger problem ``H(pi | R01) -> min`` over couplings of
``(mu0, mu1)``, solved by iterative proportional fitting in the log domain.

The optimiser has product form ``pi = f0(x) g1(y) R01(x, y)`` where
``(f0, g1)`` solve the Schrödinger system

    f0(x) * sum_y R01(x, y) g1(y) = mu0(x),
    g1(y) * sum_x R01(x, y) f0(x) = mu1(y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .entropy import PreconditionError, as_probability
from .markov import EndpointKernel, ReversibleChain, endpoint_coupling, transition_kernel


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class BridgePotentials:
    """``(f0, g1)`` with ``pi = f0 (x) g1 R01``.

    ``log_f0``/``log_g1`` hold ``-inf`` off the supports of ``mu0``/``mu1``.
    ``normalization`` is the log-gauge shift applied after convergence.
    """

    log_f0: np.ndarray
    log_g1: np.ndarray
    normalization: float
    residual: float

    @property
    def f0(self) -> np.ndarray:
        return np.exp(self.log_f0)

    @property
    def g1(self) -> np.ndarray:
        return np.exp(self.log_g1)

    def regauged(self, c: float) -> "BridgePotentials":
        """``(c f0, g1 / c)``: same coupling, same values."""
        lc = np.log(c)
        return BridgePotentials(self.log_f0 + lc, self.log_g1 - lc,
                                self.normalization + lc, self.residual)


@dataclass(frozen=True)
class StaticSolution:
    coupling: np.ndarray
    potentials: BridgePotentials
    primal_value: float
    dual_value: float
    iterations: int
    residual_history: np.ndarray

    @property
    def duality_gap(self) -> float:
        return self.primal_value - self.dual_value


def _kernel(R01) -> EndpointKernel:
    if isinstance(R01, EndpointKernel):
        return R01
    if isinstance(R01, ReversibleChain):
        return endpoint_coupling(R01)
    with np.errstate(divide="ignore"):
        return EndpointKernel(np.log(np.asarray(R01, dtype=float)))


def _check_support(name, mu, log_base):
    bad = np.flatnonzero((mu > 0) & ~np.isfinite(log_base))
    if bad.size:
        raise PreconditionError(
            f"{name} is not absolutely continuous w.r.t. the reference marginal at state {bad[0]}"
        )


def solve(R01, mu0, mu1, tol: float = 1e-10, max_iter: int = 100_000,
          log_g1_init=None) -> StaticSolution:
    """Solve the Schrödinger system for the endpoint kernel ``R01``.

    Parameters
    ----------
    R01 : EndpointKernel, ReversibleChain or array
        Joint endpoint measure (a chain is converted with ``endpoint_coupling``).
    mu0, mu1 : array_like
        Prescribed marginals.
    tol : float
        Stop once ``max_x |pi_0(x) - mu0(x)|`` is at most ``tol`` (the second
        marginal is matched exactly after every sweep).
    max_iter : int
        Maximum number of sweeps.
    log_g1_init : array_like, optional
        Starting ``log g1`` on the support of ``mu1`` (default zero).

    Returns
    -------
    StaticSolution
    """
    K = _kernel(R01)
    mu0 = as_probability(mu0, atol=1e-9)
    mu1 = as_probability(mu1, atol=1e-9)
    if K.shape != (mu0.size, mu1.size):
        raise ValueError(f"kernel shape {K.shape} does not match marginals")
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    _check_support("mu0", mu0, K.log_row_base)
    _check_support("mu1", mu1, K.log_col_base)

    I0 = np.flatnonzero(mu0 > 0)
    I1 = np.flatnonzero(mu1 > 0)
    lk = K.log_matrix[np.ix_(I0, I1)]
    dead = np.flatnonzero(~np.isfinite(logsumexp(lk, axis=1)))
    if dead.size:
        raise PreconditionError(f"state {I0[dead[0]]} of mu0 cannot reach the support of mu1")
    la, lb = np.log(mu0[I0]), np.log(mu1[I1])
    a, b = mu0[I0], mu1[I1]

    lg = np.zeros(I1.size) if log_g1_init is None else np.asarray(log_g1_init, float)[I1].copy()
    history = []
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        lf = la - logsumexp(lk + lg[None, :], axis=1)
        lg = lb - logsumexp(lk + lf[:, None], axis=0)
        row = np.exp(lf + logsumexp(lk + lg[None, :], axis=1))
        residual = float(np.max(np.abs(row - a)))
        history.append(residual)
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"IPF did not reach tol={tol:g} in {max_iter} sweeps (residual {residual:.3e})",
            residual, it,
        )

    # deterministic gauge: equal medians of log f0 and log g1 on the supports
    shift = 0.5 * (np.median(lf) - np.median(lg))
    lf = lf - shift
    lg = lg + shift

    log_f0 = np.full(mu0.size, -np.inf)
    log_g1 = np.full(mu1.size, -np.inf)
    log_f0[I0] = lf
    log_g1[I1] = lg
    pots = BridgePotentials(log_f0, log_g1, float(-shift), residual)

    coupling = np.zeros(K.shape)
    sub = np.exp(lf[:, None] + lg[None, :] + lk)
    coupling[np.ix_(I0, I1)] = sub
    # on the support log(pi/R01) = log f0 + log g1, exact even when R01 underflows
    primal = float(np.sum(sub * (lf[:, None] + lg[None, :])))
    return StaticSolution(coupling, pots, primal, dual_value(pots, K, mu0, mu1),
                          it, np.array(history))


def dual_objective(phi, psi, R01, mu0, mu1) -> float:
    """``<phi, mu0> + <psi, mu1> - log sum exp(phi (+) psi) R01``.

    ``phi``/``psi`` may be ``-inf`` where the corresponding marginal vanishes.
    """
    K = _kernel(R01)
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    if np.any(phi[mu0 > 0] == -np.inf) or np.any(psi[mu1 > 0] == -np.inf):
        return -np.inf
    lin = float(phi[mu0 > 0] @ mu0[mu0 > 0] + psi[mu1 > 0] @ mu1[mu1 > 0])
    return lin - float(logsumexp(phi[:, None] + psi[None, :] + K.log_matrix))


def dual_value(potentials: BridgePotentials, R01, mu0, mu1) -> float:
    """Dual objective at ``(log f0, log g1)``; ``-inf`` if ``f0`` vanishes on ``supp(mu0)``."""
    return dual_objective(potentials.log_f0, potentials.log_g1, R01, mu0, mu1)


def verify_schrodinger_system(solution: StaticSolution, reference, mu0, mu1) -> dict:
    """Residuals of the Schrödinger system in density form.

    For a chain: ``f0(x) sum_y p1(x,y) g1(y) - mu0(x)/m(x)`` and the
    symmetric ``g1`` equation (``p1`` is ``m``-symmetric).  For a bare
    kernel the row/column bases play the role of ``m``.
    """
    f0, g1 = solution.potentials.f0, solution.potentials.g1
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    if isinstance(reference, ReversibleChain):
        p1 = transition_kernel(reference, 1.0)
        m = reference.m.weights
        res_f = f0 * (p1 @ g1) - mu0 / m
        res_g = g1 * (p1 @ f0) - mu1 / m
    else:
        K = _kernel(reference)
        R = K.matrix
        r0, r1 = K.row_base.weights, K.col_base.weights
        res_f = f0 * (R @ g1) / r0 - mu0 / r0
        res_g = g1 * (R.T @ f0) / r1 - mu1 / r1
    return {
        "f_residual": float(np.max(np.abs(res_f))),
        "g_residual": float(np.max(np.abs(res_g))),
        "residual": float(max(np.max(np.abs(res_f)), np.max(np.abs(res_g)))),
    }


def blend_marginals(mu, reference, eps: float) -> np.ndarray:
    """``(1 - eps) mu + eps reference``; full support whenever ``reference`` has it."""
    if not 0 < eps < 1:
        raise PreconditionError(f"eps must lie in (0, 1), got {eps!r}")
    return (1 - eps) * np.asarray(mu, dtype=float) + eps * np.asarray(reference, dtype=float)
