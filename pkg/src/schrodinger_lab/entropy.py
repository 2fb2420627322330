"""Relative entropy of finite nonnegative measures.

Measures need not have unit mass: the reference of a Schrödinger problem is
typically an unnormalised measure, so ``H(p|r)`` may be negative.  The value
``+inf`` is returned (never a large float) when ``p`` is not absolutely
continuous with respect to ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASS_RTOL = 1e-12


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


@dataclass(frozen=True)
class Measure:
    """Nonnegative weights on a finite index set."""

    weights: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim == 0:
            raise ValueError("weights must be indexed by states")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total_mass", float(w.sum()))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= MASS_RTOL

    def support(self) -> np.ndarray:
        return self.weights > 0

    def normalized(self) -> "Measure":
        if self.total_mass <= 0:
            raise ValueError("cannot normalise the zero measure")
        return Measure(self.weights / self.total_mass)


def as_probability(p, atol: float = MASS_RTOL) -> np.ndarray:
    """Return ``p`` as a float array after checking it is a probability vector."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise PreconditionError("probability weights must be finite and nonnegative")
    if abs(p.sum() - 1.0) > atol:
        raise PreconditionError(f"probability weights sum to {p.sum()!r}, not 1")
    return p


def _pair(p, r):
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if p.shape != r.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {r.shape}")
    return p, r


def relative_entropy(p, r) -> float:
    """``sum_x p(x) log(p(x)/r(x))`` with ``0 log(0/r) = 0``.

    Works for arrays of any shape (joint measures are passed as matrices).
    Returns ``inf`` when ``p(x) > 0`` at some ``x`` with ``r(x) = 0``.
    """
    p, r = _pair(p, r)
    pos = p > 0
    if np.any(r[pos] <= 0):
        return np.inf
    pp = p[pos]
    return float(np.sum(pp * (np.log(pp) - np.log(r[pos]))))


def total_variation(p, q) -> float:
    p, q = _pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


def verify_variational_formula(p, r, trial_functions) -> dict:
    """Check ``<u,p> - log<e^u,r> <= H(p|r)`` for each trial ``u``, and
    equality at the optimiser ``u* = log(p/r)`` on the support of ``p``.

    ``u*`` is set to ``-inf`` off the support of ``p`` (the supremum is only
    approached there); the log-partition is evaluated on the support.
    """
    p, r = _pair(p, r)
    p = as_probability(p, atol=1e-10)
    h = relative_entropy(p, r)
    if not np.isfinite(h):
        raise PreconditionError("p is not absolutely continuous w.r.t. r")
    bounds = []
    for u in trial_functions:
        u = np.asarray(u, dtype=float)
        if u.shape != p.shape:
            raise ValueError("trial function has the wrong shape")
        mask = r > 0
        shift = u[mask].max()
        log_z = shift + np.log(np.sum(np.exp(u[mask] - shift) * r[mask]))
        bounds.append(float(p @ u - log_z))
    bounds = np.array(bounds)
    pos = p > 0
    u_star = np.log(p[pos]) - np.log(r[pos])
    at_opt = float(p[pos] @ u_star - np.log(np.sum(np.exp(u_star) * r[pos])))
    return {
        "entropy": h,
        "bounds": bounds,
        "max_violation": float(np.max(bounds - h, initial=-np.inf)),
        "bounds_hold": bool(np.all(bounds <= h + 1e-10)),
        "optimal_value": at_opt,
        "optimal_gap": abs(at_opt - h),
    }


def additive_decomposition(joint_p, joint_r) -> tuple[float, float]:
    """Split ``H(p|r)`` on ``X x Y`` into the first-marginal term and the
    ``p_X``-averaged entropy of the conditionals ``p(.|x)`` against ``r(.|x)``.
    """
    p, r = _pair(joint_p, joint_r)
    if p.ndim != 2:
        raise ValueError("joint measures must be matrices")
    px, rx = p.sum(axis=1), r.sum(axis=1)
    marginal = relative_entropy(px, rx)
    conditional = 0.0
    for x in np.flatnonzero(px > 0):
        if rx[x] <= 0:
            return marginal, np.inf
        h = relative_entropy(p[x] / px[x], r[x] / rx[x])
        if not np.isfinite(h):
            return marginal, np.inf
        conditional += px[x] * h
    return marginal, float(conditional)


def pushforward(p, labels, n_labels: int | None = None) -> np.ndarray:
    """Image of ``p`` under the state map ``x -> labels[x]``."""
    p = np.asarray(p, dtype=float)
    labels = np.asarray(labels, dtype=int)
    return np.bincount(labels, weights=p, minlength=n_labels or labels.max() + 1)
