"""Sampling the killing time and the pre-kill location.

The killing time is the first time the integrated hazard along the path
crosses an independent Exp(1) threshold.  For chains the hazard is constant
between jumps, so killing is an exponential clock racing the jump clock; for
the ray the threshold equation is inverted in closed form, or the killing
time is drawn by Poisson thinning against piecewise-constant local bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._graph import jump_graph, reachable, unkillable_states
from .errors import KillingNotAlmostSureError
from .process import GeneratorMatrix, PiecewisePolynomialRate, RateTable

EVENT_CAP = 10**7


@dataclass(frozen=True)
class ExitSample:
    """Pre-kill location and kill time of one killed trajectory."""

    location: float
    time: float
    n_thinning_rejections: int = 0


@dataclass(frozen=True, eq=False)
class ExitBatch:
    """Many independent :class:`ExitSample` draws stored column-wise.

    ``hazard`` is the integrated hazard accumulated by each trajectory up to
    its kill time, when the sampler tracks it.  ``touched_boundary`` flags
    chain trajectories that visited a truncation boundary state.
    """

    locations: np.ndarray
    times: np.ndarray
    rejections: np.ndarray
    hazard: Optional[np.ndarray] = None
    touched_boundary: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> ExitSample:
        loc = self.locations[i]
        loc = int(loc) if np.issubdtype(self.locations.dtype, np.integer) else float(loc)
        return ExitSample(loc, float(self.times[i]), int(self.rejections[i]))

    @staticmethod
    def concat(batches) -> "ExitBatch":
        batches = list(batches)

        def cat(name):
            parts = [getattr(b, name) for b in batches]
            return None if any(p is None for p in parts) else np.concatenate(parts)

        return ExitBatch(
            cat("locations"), cat("times"), cat("rejections"),
            cat("hazard"), cat("touched_boundary"),
        )


@dataclass
class HazardAccumulator:
    """Running integrated hazard against a fixed Exp(1) threshold.

    ``exp(-accumulated)`` is the survival weight of the path so far.
    """

    threshold: float
    accumulated: float = 0.0

    @property
    def fired(self) -> bool:
        return self.accumulated >= self.threshold

    def advance(self, rate: float, duration: float) -> Optional[float]:
        """Accumulate ``rate`` for ``duration``.

        Returns the elapsed time within this stretch at which the threshold
        is crossed, or None if it is not crossed.
        """
        remaining = self.threshold - self.accumulated
        gained = rate * duration if rate > 0 else 0.0
        if gained >= remaining:
            self.accumulated = self.threshold
            return remaining / rate
        if np.isinf(duration):
            raise KillingNotAlmostSureError("path stays forever where the killing rate is zero")
        self.accumulated += gained
        return None


class _JumpTable:
    """Per-state cumulative jump distributions, padded to a common width."""

    def __init__(self, q: np.ndarray):
        n = q.shape[0]
        off = q.copy()
        np.fill_diagonal(off, 0.0)
        width = max(1, int((off > 0).sum(axis=1).max()))
        self.targets = np.tile(np.arange(n)[:, None], (1, width))
        self.cumprob = np.ones((n, width))
        for i in range(n):
            js = np.flatnonzero(off[i] > 0)
            if js.size:
                self.targets[i, :js.size] = js
                self.targets[i, js.size:] = js[-1]
                self.cumprob[i, :js.size] = np.cumsum(off[i, js]) / off[i, js].sum()
        self.width = width

    def step(self, states, u):
        k = (u[:, None] >= self.cumprob[states]).sum(axis=1)
        return self.targets[states, np.minimum(k, self.width - 1)]


def _check_killing_reachable(Q: GeneratorMatrix, kvec: np.ndarray, starts: np.ndarray):
    stuck = unkillable_states(Q.q, kvec)
    if stuck.any():
        hit = reachable(jump_graph(Q.q), np.unique(starts)) & stuck
        if hit.any():
            bad = Q.labels[np.flatnonzero(hit)][:5].tolist()
            raise KillingNotAlmostSureError(
                f"states {bad} are reachable but cannot reach positive killing"
            )


def run_killed_chain(
    Q: GeneratorMatrix,
    kappa: RateTable,
    starts,
    rng: np.random.Generator,
    *,
    event_cap: int = EVENT_CAP,
    occupation: bool = False,
):
    """Run independent killed trajectories of a chain, all in lockstep.

    Each active trajectory advances by one event per iteration: hold
    Exp(q_i + kappa_i), then die with probability kappa_i / (q_i + kappa_i)
    or jump to j with probability q[i, j] / (q_i + kappa_i).

    Returns ``(batch, occ)`` where ``occ`` is the total time spent in each
    state (state order of ``Q``) if ``occupation`` is set, else None.
    """
    kvec = kappa.vector(Q)
    idx0 = Q.indices_of(starts)
    _check_killing_reachable(Q, kvec, idx0)
    table = _JumpTable(Q.q)
    total = Q.exit_rates + kvec
    with np.errstate(divide="ignore", invalid="ignore"):
        p_kill = np.where(total > 0, kvec / total, 0.0)
    on_boundary = np.zeros(Q.n, dtype=bool)
    on_boundary[Q.boundary_indices] = True

    m = idx0.size
    loc = np.empty(m, dtype=np.int64)
    tau = np.empty(m)
    haz = np.empty(m)
    touched = np.zeros(m, dtype=bool)
    occ = np.zeros(Q.n) if occupation else None

    alive = np.arange(m)
    state = idx0.copy()
    t = np.zeros(m)
    h = np.zeros(m)
    hit = np.zeros(m, dtype=bool)
    events = 0
    while alive.size:
        events += 1
        if events > event_cap:
            raise KillingNotAlmostSureError(
                f"{alive.size} trajectories still alive after {event_cap} events"
            )
        dwell = rng.standard_exponential(alive.size) / total[state]
        t += dwell
        h += kvec[state] * dwell
        hit |= on_boundary[state]
        if occupation:
            occ += np.bincount(state, weights=dwell, minlength=Q.n)
        u = rng.random(alive.size)
        pk = p_kill[state]
        dead = u < pk
        if dead.any():
            who = alive[dead]
            loc[who] = state[dead]
            tau[who] = t[dead]
            haz[who] = h[dead]
            touched[who] = hit[dead]
            keep = ~dead
            alive, state, t, h, hit, u, pk = (
                alive[keep], state[keep], t[keep], h[keep], hit[keep], u[keep], pk[keep]
            )
        if alive.size:
            # reuse u: conditional on survival it is uniform on [pk, 1)
            state = table.step(state, (u - pk) / (1.0 - pk))

    batch = ExitBatch(Q.labels[loc], tau, np.zeros(m, dtype=np.int64), haz, touched)
    return batch, occ


def sample_exits_ctmc(Q, kappa, starts, rng, *, event_cap: int = EVENT_CAP) -> ExitBatch:
    """Exit samples for trajectories started at each label in ``starts``."""
    batch, _ = run_killed_chain(Q, kappa, starts, rng, event_cap=event_cap)
    return batch


def sample_exit_ctmc(Q, kappa, x0, rng, *, event_cap: int = EVENT_CAP) -> ExitSample:
    return sample_exits_ctmc(Q, kappa, [x0], rng, event_cap=event_cap)[0]


def sample_exit_ctmc_threshold(Q, kappa, x0, rng, *, event_cap: int = EVENT_CAP) -> ExitSample:
    """Reference sampler: one Exp(1) threshold against the unkilled path.

    Simulates the chain without killing and integrates kappa along it until
    the threshold is crossed.  Slower than :func:`sample_exit_ctmc` and used
    to cross-check it.
    """
    kvec = kappa.vector(Q)
    rates = Q.exit_rates
    off = np.where(np.eye(Q.n, dtype=bool), 0.0, Q.q)
    acc = HazardAccumulator(rng.standard_exponential())
    i = Q.index_of(x0)
    t = 0.0
    for _ in range(event_cap):
        dwell = rng.exponential(1.0 / rates[i]) if rates[i] > 0 else np.inf
        fired = acc.advance(kvec[i], dwell)
        if fired is not None:
            return ExitSample(int(Q.labels[i]), t + fired)
        t += dwell
        i = rng.choice(Q.n, p=off[i] / rates[i])
    raise KillingNotAlmostSureError(f"no kill after {event_cap} events")


def _ray_rate(kappa):
    if not isinstance(kappa, PiecewisePolynomialRate):
        raise TypeError("ray samplers need a PiecewisePolynomialRate")
    if kappa.total_hazard_finite:
        raise KillingNotAlmostSureError("integral of kappa along the ray is finite")
    return kappa


def sample_exits_ray_inversion(kappa, x0: float, n: int, rng, xi=None) -> ExitBatch:
    """Invert the integrated hazard at ``n`` Exp(1) thresholds.

    ``xi`` injects the thresholds instead of drawing them from ``rng``.
    """
    kappa = _ray_rate(kappa)
    xi = rng.standard_exponential(n) if xi is None else np.asarray(xi, dtype=float).reshape(n)
    loc = kappa.inverse_hazard(kappa.hazard(x0) + xi)
    return ExitBatch(loc, loc - x0, np.zeros(n, dtype=np.int64), xi.copy())


def sample_exit_ray_inversion(kappa, x0: float, rng, xi: Optional[float] = None) -> ExitSample:
    return sample_exits_ray_inversion(kappa, x0, 1, rng, None if xi is None else [xi])[0]


def sample_exits_ray_thinning(kappa, x0: float, n: int, rng, window: float = 1.0,
                              *, max_rounds: int = EVENT_CAP) -> ExitBatch:
    """First arrivals of the thinned Poisson process, ``n`` independent draws.

    Time is cut into windows ``[k*window, (k+1)*window)``.  In window ``k``
    candidates arrive at the constant rate ``M_k``, the maximum of kappa over
    the positions swept in that window, and a candidate at time ``t`` is kept
    with probability ``kappa(x0 + t) / M_k``.
    """
    kappa = _ray_rate(kappa)
    if window <= 0:
        raise ValueError("window must be positive")
    bounds = []

    def bound(k):
        while len(bounds) <= k.max(initial=0):
            j = len(bounds)
            bounds.append(kappa.bound_on(x0 + j * window, x0 + (j + 1) * window))
        return np.asarray(bounds)[k]

    out = np.empty(n)
    rejected = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    t = np.zeros(n)
    k = np.zeros(n, dtype=np.int64)
    for _ in range(max_rounds):
        if not alive.size:
            break
        M = bound(k)
        end = (k + 1) * window
        with np.errstate(divide="ignore"):
            cand = t + rng.standard_exponential(alive.size) / M
        past = cand >= end
        u = rng.random(alive.size)
        inside = ~past
        rate = np.zeros(alive.size)
        rate[inside] = kappa(x0 + cand[inside])
        accept = inside & (u * M < rate)
        reject = inside & ~accept
        out[alive[accept]] = cand[accept]
        rejected[alive[reject]] += 1
        t = np.where(past, end, cand)
        k = np.where(past, k + 1, k)
        keep = ~accept
        alive, t, k = alive[keep], t[keep], k[keep]
    else:
        raise KillingNotAlmostSureError(f"thinning did not finish in {max_rounds} rounds")
    return ExitBatch(x0 + out, out, rejected)


def sample_exit_ray_thinning(kappa, x0: float, rng, window: float = 1.0) -> ExitSample:
    return sample_exits_ray_thinning(kappa, x0, 1, rng, window)[0]


def integrated_hazard(kappa, segment) -> float:
    """Integrated hazard over a path segment.

    For a :class:`RateTable`, ``segment`` is a sequence of ``(state, dwell)``
    pairs.  For a ray rate it is an interval ``(a, b)`` of positions.
    """
    if isinstance(kappa, RateTable):
        return float(sum(kappa(s) * d for s, d in segment))
    a, b = segment
    if b < a:
        raise ValueError("segment must satisfy a <= b")
    return float(kappa.hazard_between(a, b))
