"""Entropic interpolation of a solved bridge on a reversible chain.

With ``f_t = exp(tL) f0`` and ``g_t = exp((1-t)L) g1`` the time marginals are
``mu_t = f_t g_t m``.  The potentials ``phi = log f`` and ``psi = log g``
drive the forward/backward jump intensities, satisfy discrete
Hamilton-Jacobi-Bellman equations, and give the kinetic action and the
second derivative of the entropy along the interpolation.

Per-state quantities on states with ``mu_t = 0`` are stored as ``nan``
(intensities) or ``-inf`` (log-potentials of vanishing ``f``/``g``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .entropy import PreconditionError, relative_entropy
from .markov import ReversibleChain, transition_kernel
from .schrodinger_system import BridgePotentials


class ConsistencyError(RuntimeError):
    """The bridge data contradict the Born formula."""


@dataclass(frozen=True)
class InterpolationPath:
    times: np.ndarray
    mu: np.ndarray
    f: np.ndarray
    g: np.ndarray
    m: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.f)

    @property
    def psi(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.g)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def entropy_profile(self) -> np.ndarray:
        return np.array([relative_entropy(mu, self.m) for mu in self.mu])

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12:
            raise ValueError(f"t={t} is not on the grid")
        return i


@dataclass(frozen=True)
class JumpField:
    """Forward and backward jump intensities at each grid time, shape ``(T+1, n, n)``."""

    times: np.ndarray
    forward: np.ndarray
    backward: np.ndarray


# graph operators: J is the rate matrix, functions are vectors over states


def theta(a):
    """``e^a - a - 1``."""
    return np.expm1(a) - a


def theta_star(b):
    """Convex conjugate of ``theta``: ``(b+1) log(b+1) - b`` on ``b >= -1``, ``+inf`` below."""
    b = np.asarray(b, dtype=float)
    out = xlogy(b + 1, np.where(b >= -1, b + 1, 1.0)) - b
    return np.where(b < -1, np.inf, out)


def _diff(u):
    """``D[x, y] = u(y) - u(x)``."""
    return u[None, :] - u[:, None]


def generator_apply(J, u):
    return J @ u - J.sum(axis=1) * u


def carre_du_champ(J, u, v):
    """``Gamma(u, v)(x) = sum_y J[x,y] (u_y - u_x)(v_y - v_x)``."""
    return np.sum(J * _diff(u) * _diff(v), axis=1)


def _exp_gamma(J, psi, v):
    """``e^{-psi} Gamma(e^psi, v)`` without forming ``e^psi``."""
    return np.sum(J * np.expm1(_diff(psi)) * _diff(v), axis=1)


def nonlinear_b(J, psi):
    """``B psi = e^{-psi} L e^{psi}``."""
    return np.sum(J * np.expm1(_diff(psi)), axis=1)


def theta_operator(J, psi):
    """``Theta psi = e^{-psi} Gamma(e^psi, psi) - B psi + L psi``,
    i.e. ``sum_y J[x,y] [(e^D - 1)(D - 1) + D]`` with ``D = psi_y - psi_x``."""
    D = _diff(psi)
    return np.sum(J * (np.expm1(D) * (D - 1) + D), axis=1)


def theta2_operator(J, psi):
    """``L Theta psi + e^{-psi} Gamma(e^psi, Theta psi)
    + e^{-psi} Gamma(e^psi, psi) B psi - e^{-psi} Gamma(e^psi B psi, psi)``."""
    th = theta_operator(J, psi)
    b = nonlinear_b(J, psi)
    D = _diff(psi)
    e = np.exp(D)
    last = np.sum(J * (e * b[None, :] - b[:, None]) * D, axis=1)
    return generator_apply(J, th) + _exp_gamma(J, psi, th) + _exp_gamma(J, psi, psi) * b - last


# path construction


def build_path(chain: ReversibleChain, potentials: BridgePotentials, grid_size: int = 1000,
               defect_tol: float = 1e-8) -> InterpolationPath:
    """Time marginals on ``grid_size`` uniform intervals of ``[0, 1]``.

    Each ``f_t``/``g_t`` comes from its own uniformized exponential.  The
    marginals are not renormalised: a mass defect above ``defect_tol``
    means the potentials do not solve the Schrödinger system for this chain.
    """
    if grid_size < 2:
        raise PreconditionError("grid_size must be at least 2")
    times = np.linspace(0.0, 1.0, grid_size + 1)
    f0, g1 = potentials.f0, potentials.g1
    m = chain.m.weights
    F = np.empty((times.size, chain.n))
    G = np.empty_like(F)
    for i, t in enumerate(times):
        F[i] = f0 if t == 0 else transition_kernel(chain, t) @ f0
        G[i] = g1 if t == 1 else transition_kernel(chain, 1.0 - t) @ g1
    mu = F * G * m[None, :]
    defect = np.max(np.abs(mu.sum(axis=1) - 1.0))
    if defect > defect_tol:
        raise ConsistencyError(f"time marginals lose mass (defect {defect:.3e}); bad bridge")
    return InterpolationPath(times, mu, F, G, m.copy())


def bridge_marginal(chain: ReversibleChain, coupling, t: float) -> np.ndarray:
    """``sum_{x,y} pi[x,y] p_t(x,z) p_{1-t}(z,y) / p_1(x,y)``: mixture of bridges."""
    p1 = transition_kernel(chain, 1.0)
    pi = np.asarray(coupling, dtype=float)
    sup = pi > 0
    if np.any(p1[sup] <= 0):
        raise ValueError("coupling charges a pair unreachable at time 1")
    W = np.where(sup, pi / np.where(sup, p1, 1.0), 0.0)
    pt = transition_kernel(chain, t)
    ps = transition_kernel(chain, 1.0 - t)
    return np.einsum("xz,xy,zy->z", pt, W, ps)


def verify_disintegration(path: InterpolationPath, chain: ReversibleChain, coupling,
                          times=None) -> float:
    """Max gap between ``mu_t`` and the bridge-mixture marginal over grid times."""
    idx = range(path.times.size) if times is None else [path.index(t) for t in times]
    return float(max(np.max(np.abs(path.mu[i] - bridge_marginal(chain, coupling, path.times[i])))
                     for i in idx))


def three_time_joint(chain: ReversibleChain, coupling, t: float) -> np.ndarray:
    """``Q[x, z, y] = P(X0=x, Xt=z, X1=y)`` for the bridge mixture over ``coupling``."""
    p1 = transition_kernel(chain, 1.0)
    pi = np.asarray(coupling, dtype=float)
    sup = pi > 0
    W = np.where(sup, pi / np.where(sup, p1, 1.0), 0.0)
    pt = transition_kernel(chain, t)
    ps = transition_kernel(chain, 1.0 - t)
    return pt[:, :, None] * W[:, None, :] * ps[None, :, :]


def verify_markov_factorization(path: InterpolationPath | None, chain: ReversibleChain, coupling,
                                times=(0.25, 0.5, 0.75)) -> float:
    """Max over ``times`` and ``(x, z, y)`` of
    ``|Q(x,z,y) - Q(x,z) Q(z,y) / Q(z)|``: zero iff past and future are
    conditionally independent given the present."""
    worst = 0.0
    for t in times:
        Q = three_time_joint(chain, coupling, t)
        qxz = Q.sum(axis=2)
        qzy = Q.sum(axis=0)
        qz = qxz.sum(axis=0)
        pos = qz > 0
        fact = np.zeros_like(Q)
        fact[:, pos, :] = qxz[:, pos, None] * qzy[None, pos, :] / qz[None, pos, None]
        worst = max(worst, float(np.max(np.abs(Q - fact))))
    return worst


def jump_intensities(path: InterpolationPath, chain: ReversibleChain) -> JumpField:
    """Forward ``J[x,y] g_t(y)/g_t(x)`` and backward ``J[x,y] f_t(y)/f_t(x)``.

    Rows of states with ``mu_t(x) = 0`` are ``nan``.
    """
    J = chain.rates
    T = path.times.size
    fwd = np.full((T, chain.n, chain.n), np.nan)
    bwd = np.full_like(fwd, np.nan)
    for i in range(T):
        live = path.mu[i] > 0
        if np.any(path.g[i][live] <= 0) or np.any(path.f[i][live] <= 0):
            raise ConsistencyError(f"vanishing potential on the support of mu_t at t={path.times[i]}")
        g, f = path.g[i], path.f[i]
        fwd[i, live] = J[live] * g[None, :] / g[live, None]
        bwd[i, live] = J[live] * f[None, :] / f[live, None]
    return JumpField(path.times, fwd, bwd)


def _central(series, dt):
    out = np.full_like(series, np.nan)
    out[1:-1] = (series[2:] - series[:-2]) / (2 * dt)
    return out


def hjb_residual(path: InterpolationPath, chain: ReversibleChain) -> dict:
    """Residuals of
    ``(d/dt + L) psi + sum_y theta(psi_y - psi_x) J[x,y] = 0`` and
    ``(-d/dt + L) phi + sum_y theta(phi_y - phi_x) J[x,y] = 0``
    with central time differences at interior grid points."""
    if path.times.size < 3:
        raise PreconditionError("need at least three grid times")
    J = chain.rates
    dt = path.dt
    psi, phi = path.psi, path.phi
    with np.errstate(invalid="ignore"):
        dpsi, dphi = _central(psi, dt), _central(phi, dt)
        rp = np.full_like(psi, np.nan)
        rf = np.full_like(phi, np.nan)
        for i in range(1, path.times.size - 1):
            p, f = psi[i], phi[i]
            rp[i] = dpsi[i] + generator_apply(J, p) + np.sum(theta(_diff(p)) * J, axis=1)
            rf[i] = -dphi[i] + generator_apply(J, f) + np.sum(theta(_diff(f)) * J, axis=1)
    psi_max = float(np.nanmax(np.abs(rp)))
    phi_max = float(np.nanmax(np.abs(rf)))
    return {"psi": rp, "phi": rf, "psi_max": psi_max, "phi_max": phi_max,
            "max": max(psi_max, phi_max)}


def current_equation_residual(path: InterpolationPath, chain: ReversibleChain) -> dict:
    """``d/dt mu_t(x) - sum_y [mu_t(y) j(y;x) J[y,x] - mu_t(x) j(x;y) J[x,y]]``
    with ``j(x;y) = exp(psi_t(y) - psi_t(x))``."""
    J = chain.rates
    dmu = _central(path.mu, path.dt)
    res = np.full_like(path.mu, np.nan)
    for i in range(1, path.times.size - 1):
        flow = path.mu[i][:, None] * J * path.g[i][None, :] / path.g[i][:, None]
        res[i] = dmu[i] - (flow.sum(axis=0) - flow.sum(axis=1))
    return {"residual": res, "max": float(np.nanmax(np.abs(res)))}


def heat_residual(path: InterpolationPath, chain: ReversibleChain) -> dict:
    """``(-d/dt + L) f`` and ``(d/dt + L) g`` at interior grid times."""
    J = chain.rates
    df, dg = _central(path.f, path.dt), _central(path.g, path.dt)
    rf = np.full_like(path.f, np.nan)
    rg = np.full_like(path.g, np.nan)
    for i in range(1, path.times.size - 1):
        rf[i] = -df[i] + generator_apply(J, path.f[i])
        rg[i] = dg[i] + generator_apply(J, path.g[i])
    return {"f_max": float(np.nanmax(np.abs(rf))), "g_max": float(np.nanmax(np.abs(rg)))}


def _trapezoid(values, times):
    # fixed ascending summation order
    dt = np.diff(times)
    total = 0.0
    for i in range(dt.size):
        total += 0.5 * dt[i] * (values[i] + values[i + 1])
    return total


def action_integrand(path: InterpolationPath, chain: ReversibleChain) -> np.ndarray:
    """``sum_{x,y} theta*(j(t,x;y) - 1) mu_t(x) J[x,y]`` at each grid time."""
    J = chain.rates
    out = np.empty(path.times.size)
    for i in range(path.times.size):
        live = path.mu[i] > 0
        g = path.g[i]
        j = g[None, :] / g[live, None]
        if np.any(j < 0):
            raise ConsistencyError("negative jump ratio")
        # theta*(j - 1) = j log j - j + 1, finite (=1) at j = 0
        val = xlogy(j, j) - j + 1.0
        out[i] = float(np.sum(path.mu[i][live, None] * J[live] * val))
    return out


def action_value(path: InterpolationPath, chain: ReversibleChain) -> float:
    """Time-integrated kinetic action of the interpolation (trapezoid rule)."""
    return _trapezoid(action_integrand(path, chain), path.times)


def action_value_adaptive(chain: ReversibleChain, potentials: BridgePotentials,
                          tol: float = 1e-11) -> float:
    """The same action by adaptive quadrature of the exact integrand.

    With point-mass endpoints the integrand has a logarithmic singularity at
    the ends of ``[0, 1]``, where the grid trapezoid rule is only first order.
    """
    from scipy.integrate import quad

    J = chain.rates
    m = chain.m.weights
    f0, g1 = potentials.f0, potentials.g1

    def integrand(t):
        f = transition_kernel(chain, t) @ f0
        g = transition_kernel(chain, 1.0 - t) @ g1
        mu = f * g * m
        live = mu > 0
        j = g[None, :] / g[live, None]
        return float(np.sum(mu[live, None] * J[live] * (xlogy(j, j) - j + 1.0)))

    value, _ = quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=500)
    return float(value)


def gaussian_action_value(path: InterpolationPath, chain: ReversibleChain) -> float:
    """Continuum kinetic action ``int (a/2) |grad psi_t|^2 dmu_t dt`` on a 1-D grid walk.

    ``chain`` must be a nearest-neighbour walk on a uniform grid (see
    ``grid_diffusion_chain``) with diffusivity ``a = 2 J h^2``.  Gradients are
    centred differences at edge midpoints, weighted by the average of
    ``mu_t`` at the two endpoints.  This is a discretisation of the Brownian
    formula, not an exact identity on the grid.
    """
    x = np.array(chain.graph.states, dtype=float)
    J = chain.rates
    n = x.size
    h = np.diff(x)
    off = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > 1
    if np.any(J[off] != 0) or np.any(h <= 0):
        raise PreconditionError("gaussian action needs a nearest-neighbour 1-D grid walk")
    rate = J[np.arange(n - 1), np.arange(1, n)]
    if not np.allclose(rate, rate[0]) or not np.allclose(h, h[0]):
        raise PreconditionError("gaussian action needs a uniform grid with constant rates")
    h = h[0]
    a = 2.0 * rate[0] * h * h
    vals = np.empty(path.times.size)
    for i in range(path.times.size):
        psi = path.psi[i]
        with np.errstate(invalid="ignore"):
            grad = np.diff(psi) / h
        w = 0.5 * (path.mu[i][:-1] + path.mu[i][1:])
        term = np.where(w > 0, 0.5 * a * np.where(w > 0, grad, 0.0) ** 2 * w, 0.0)
        vals[i] = float(np.sum(term))
    return _trapezoid(vals, path.times)


def entropy_convexity_check(path: InterpolationPath, chain: ReversibleChain,
                            normalization: float = 0.5) -> dict:
    """Compare the finite-difference ``h''(t)`` of ``h(t) = H(mu_t|m)`` with
    ``normalization * <Theta2 phi_t + Theta2 psi_t, mu_t>`` at interior times.

    ``max_relative_mismatch`` is ``max_t |h'' - rhs| / max_t |rhs|``.
    ``measured_constant`` is the least-squares ``c`` in
    ``h'' ~ c <Theta2 phi + Theta2 psi, mu>``.
    """
    J = chain.rates
    h = path.entropy_profile()
    dt = path.dt
    inner = slice(1, path.times.size - 1)
    fd = (h[2:] - 2 * h[1:-1] + h[:-2]) / dt**2
    raw = np.empty(fd.size)
    for k, i in enumerate(range(1, path.times.size - 1)):
        if np.any(path.mu[i] <= 0):
            raise PreconditionError("entropy convexity needs full-support marginals on (0, 1)")
        raw[k] = float(path.mu[i] @ (theta2_operator(J, path.phi[i]) + theta2_operator(J, path.psi[i])))
    rhs = normalization * raw
    scale = float(np.max(np.abs(rhs)))
    return {
        "times": path.times[inner],
        "h": h,
        "h_second_derivative": fd,
        "rhs": rhs,
        "max_abs_mismatch": float(np.max(np.abs(fd - rhs))),
        "max_relative_mismatch": float(np.max(np.abs(fd - rhs)) / scale) if scale > 0 else float(np.max(np.abs(fd))),
        "measured_constant": float(fd @ raw / (raw @ raw)) if np.any(raw) else float("nan"),
    }
