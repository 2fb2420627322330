"""Schrödinger's thought experiment with finitely many walkers.

``n`` independent copies of the reference chain start from deterministic
positions whose empirical profile approximates ``mu0``.  A batch is accepted
when its time-1 empirical profile lies within total-variation distance
``epsilon`` of ``mu1``.  Accepted batches give the conditional mid-time
profile and ``(1/n) log P(accept)``, to be compared with the entropic
interpolation and ``-(inf S - H(mu0|m))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._parallel import default_workers, ordered_map
from .entropy import PreconditionError, relative_entropy, total_variation
from .markov import ReversibleChain, transition_kernel
from .schrodinger_system import StaticSolution


class NoAcceptanceError(RuntimeError):
    """No batch hit the conditioning event."""


def initial_positions_from_profile(mu0, n: int) -> np.ndarray:
    """Deterministic start states: ``n * mu0`` rounded by largest remainder."""
    from .transport import largest_remainder

    counts = largest_remainder(mu0, n)
    return np.repeat(np.arange(len(counts)), counts)


@dataclass(frozen=True)
class SimulationConfig:
    chain: ReversibleChain
    n: int
    initial_positions: np.ndarray
    target: np.ndarray
    epsilon: float
    seed: int
    batches: int
    min_accepted: int | None = None
    mid_time: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise PreconditionError("n must be positive")
        if not 0 < self.epsilon <= 1:
            raise PreconditionError("epsilon must lie in (0, 1]")
        pos = np.asarray(self.initial_positions, dtype=int)
        if pos.shape != (self.n,):
            raise PreconditionError(f"expected {self.n} initial positions, got {pos.shape}")
        object.__setattr__(self, "initial_positions", pos)
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))

    @classmethod
    def from_profile(cls, chain, n, mu0, target, epsilon, seed, batches, **kw):
        return cls(chain, n, initial_positions_from_profile(mu0, n), target, epsilon, seed,
                   batches, **kw)

    @property
    def initial_profile(self) -> np.ndarray:
        return np.bincount(self.initial_positions, minlength=self.chain.n) / self.n


@dataclass(frozen=True)
class Trajectories:
    """Padded jump records: ``times[i, 0] = 0``, unused slots hold ``inf``."""

    times: np.ndarray
    states: np.ndarray

    def positions_at(self, t: float) -> np.ndarray:
        last = np.sum(self.times <= t, axis=1) - 1
        return self.states[np.arange(self.states.shape[0]), last]

    def jump_counts(self) -> np.ndarray:
        return np.sum(np.isfinite(self.times), axis=1) - 1


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(batch,)))


def simulate_walkers(chain: ReversibleChain, initial_positions, rng: np.random.Generator,
                     horizon: float = 1.0) -> Trajectories:
    """Gillespie paths on ``[0, horizon]``, all walkers advanced together:
    exponential holding time with rate ``sum_y J[x, y]``, then a jump to ``y``
    with probability ``J[x, y] / sum_y J[x, y]``."""
    J = chain.rates
    q = J.sum(axis=1)
    cum = np.cumsum(J / q[:, None], axis=1)
    pos = np.array(initial_positions, dtype=int)
    n = pos.size
    t = np.zeros(n)
    times, states = [np.zeros(n)], [pos.copy()]
    live = np.ones(n, dtype=bool)
    while live.any():
        t_new = t + rng.exponential(1.0 / q[pos])
        live = live & (t_new <= horizon)
        u = rng.random(n)
        nxt = np.minimum((u[:, None] > cum[pos]).sum(axis=1), chain.n - 1)
        pos = np.where(live, nxt, pos)
        t = np.where(live, t_new, t)
        if live.any():
            times.append(np.where(live, t_new, np.inf))
            states.append(pos.copy())
    T = np.stack(times, axis=1)
    S = np.stack(states, axis=1)
    # compact: move finite jump times to the front of each row
    order = np.argsort(T, axis=1, kind="stable")
    return Trajectories(np.take_along_axis(T, order, axis=1), np.take_along_axis(S, order, axis=1))


def empirical_profile(positions, n_states: int) -> np.ndarray:
    return np.bincount(positions, minlength=n_states) / len(positions)


TIE_SLACK = 1e-12


def in_ball(profile, target, epsilon: float) -> bool:
    """``TV(profile, target) < epsilon`` for the open ball.

    Empirical profiles live on a ``1/n`` lattice, so distances equal to
    ``epsilon`` are common; they are rejected regardless of rounding noise.
    """
    return total_variation(profile, target) < epsilon - TIE_SLACK


def run_batch(config: SimulationConfig, batch: int) -> tuple[bool, np.ndarray, np.ndarray]:
    """(accepted, mid-time profile, time-1 profile) of one batch."""
    traj = simulate_walkers(config.chain, config.initial_positions, batch_rng(config.seed, batch))
    mid = empirical_profile(traj.positions_at(config.mid_time), config.chain.n)
    end = empirical_profile(traj.positions_at(1.0), config.chain.n)
    return in_ball(end, config.target, config.epsilon), mid, end


@dataclass(frozen=True)
class ConditionalReport:
    acceptance_rate: float
    accepted: int
    batches_run: int
    conditional_midtime_profile: np.ndarray
    interpolation_midtime_profile: np.ndarray
    tv_to_interpolation: float
    rate_estimate: float
    reference_value: float
    standard_errors: dict

    def to_dict(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "accepted": self.accepted,
            "batches_run": self.batches_run,
            "conditional_midtime_profile": self.conditional_midtime_profile.tolist(),
            "interpolation_midtime_profile": self.interpolation_midtime_profile.tolist(),
            "tv_to_interpolation": self.tv_to_interpolation,
            "rate_estimate": self.rate_estimate,
            "reference_value": self.reference_value,
            "standard_errors": self.standard_errors,
        }


def _run_batches(config: SimulationConfig, workers):
    workers = default_workers() if workers is None else workers
    chunk = max(1, 4 * workers) if config.min_accepted else config.batches
    results = []
    start = 0
    while start < config.batches:
        idx = range(start, min(config.batches, start + chunk))
        results.extend(ordered_map(lambda b: run_batch(config, b), idx, workers))
        start = idx.stop
        if config.min_accepted and sum(r[0] for r in results) >= config.min_accepted:
            # truncate at the batch that reached the quota: independent of chunking
            hits = np.cumsum([r[0] for r in results])
            results = results[: int(np.searchsorted(hits, config.min_accepted)) + 1]
            break
    return results


def condition_and_compare(config: SimulationConfig, solution: StaticSolution, mu_half,
                          bootstrap: int = 1000, workers: int | None = None) -> ConditionalReport:
    """Rejection-sample batches and compare with the entropic interpolation.

    ``mu_half`` is the interpolation's marginal at ``config.mid_time``.  With
    ``config.min_accepted`` set, batches run in index order until that many
    are accepted (or ``config.batches`` is exhausted).
    """
    results = _run_batches(config, workers)
    acc = np.array([r[0] for r in results])
    if not acc.any():
        raise NoAcceptanceError(
            f"no batch out of {len(results)} accepted; increase epsilon or the batch count, "
            "or move the target closer to the unconditioned law"
        )
    mids = np.array([r[1] for r in results])[acc]
    profile = mids.mean(axis=0)
    # the bridge's own mu0; the walkers start from its 1/n rounding
    mu0 = solution.coupling.sum(axis=1)
    reference = -(solution.primal_value - relative_entropy(mu0, config.chain.m.weights))
    rate = float(np.log(acc.mean()) / config.n)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(2**32 - 1,)))
    boot_rates, boot_tv = [], []
    for _ in range(bootstrap):
        s = acc[rng.integers(acc.size, size=acc.size)]
        if s.any():
            boot_rates.append(np.log(s.mean()) / config.n)
        ms = mids[rng.integers(mids.shape[0], size=mids.shape[0])]
        boot_tv.append(total_variation(ms.mean(axis=0), mu_half))
    mu_half = np.asarray(mu_half, dtype=float)
    return ConditionalReport(
        acceptance_rate=float(acc.mean()),
        accepted=int(acc.sum()),
        batches_run=int(acc.size),
        conditional_midtime_profile=profile,
        interpolation_midtime_profile=mu_half,
        tv_to_interpolation=total_variation(profile, mu_half),
        rate_estimate=rate,
        reference_value=float(reference),
        standard_errors={
            "rate": float(np.std(boot_rates, ddof=1)),
            "tv_to_interpolation": float(np.std(boot_tv, ddof=1)),
            "bootstrap_resamples": bootstrap,
            "degenerate_resamples": bootstrap - len(boot_rates),
        },
    )


def exact_acceptance_probability(chain: ReversibleChain, initial_positions, target,
                                 epsilon: float) -> float:
    """``P(TV(L_1^n, target) < epsilon)`` by enumerating all end states
    (small ``n`` and state spaces only)."""
    pos = np.asarray(initial_positions, dtype=int)
    if pos.size > 8 or chain.n > 4:
        raise PreconditionError("exact enumeration is limited to n <= 8 walkers on <= 4 states")
    p1 = transition_kernel(chain, 1.0)
    target = np.asarray(target, dtype=float)
    total = 0.0
    for ends in itertools.product(range(chain.n), repeat=pos.size):
        ends = np.array(ends)
        if in_ball(empirical_profile(ends, chain.n), target, epsilon):
            total += float(np.prod(p1[pos, ends]))
    return total
