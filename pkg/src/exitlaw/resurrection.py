"""The mu-resurrected process and its regenerative invariant-law estimator.

At every kill the process is reborn at a fresh draw from ``mu``, so kill
times are regeneration times and the cycles are i.i.d. killed excursions.
The invariant law is estimated by total occupation over total time across
all cycles, and reweighting it by kappa predicts the law of the kill
location.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ray
from .errors import NonIntegrableWarning
from .killing import (
    EVENT_CAP,
    run_killed_chain,
    sample_exits_ray_inversion,
    sample_exits_ray_thinning,
)
from .process import GeneratorMatrix, PiecewisePolynomialRate, RayModel
from .stats import EmpiricalDistribution


@dataclass(frozen=True, eq=False)
class RebirthMeasure:
    """Rebirth law mu: finitely many support points with probabilities."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.support))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if s.shape != w.shape or s.ndim != 1 or s.size == 0:
            raise ValueError("support and weights must be nonempty 1-d arrays of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, x) -> "RebirthMeasure":
        return cls(np.array([x]), np.array([1.0]))

    @classmethod
    def on(cls, Q: GeneratorMatrix, weights) -> "RebirthMeasure":
        """Measure over all states of ``Q``, e.g. a quasi-stationary law."""
        w = np.asarray(weights, dtype=float)
        return cls(Q.labels.copy(), w / w.sum())

    @property
    def is_point(self) -> bool:
        return self.support.size == 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.is_point:
            return np.full(n, self.support[0])
        return self.support[rng.choice(self.support.size, size=n, p=self.weights)]

    def vector(self, Q: GeneratorMatrix) -> np.ndarray:
        out = np.zeros(Q.n)
        np.add.at(out, Q.indices_of(self.support), self.weights)
        return out


@dataclass(frozen=True, eq=False)
class RegenerationLog:
    """Occupation record of ``K`` regeneration cycles.

    ``occupation`` is time per state (``labels``) or per bin (``edges``).
    ``boundary_time`` is the summed length of cycles that visited a
    truncation boundary state.
    """

    cycle_lengths: np.ndarray
    occupation: np.ndarray
    labels: Optional[np.ndarray] = None
    edges: Optional[np.ndarray] = None
    boundary_time: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.cycle_lengths, dtype=float)
        occ = np.asarray(self.occupation, dtype=float)
        object.__setattr__(self, "cycle_lengths", c)
        object.__setattr__(self, "occupation", occ)
        if c.size and np.any(c <= 0):
            raise ValueError("cycle lengths must be positive")
        if np.any(occ < 0):
            raise ValueError("occupation must be nonnegative")
        total = c.sum()
        if abs(occ.sum() - total) > 1e-9 * max(total, 1e-300):
            raise ValueError("occupation does not add up to the total time")

    @property
    def n_cycles(self) -> int:
        return self.cycle_lengths.size

    @property
    def regeneration_times(self) -> np.ndarray:
        return np.cumsum(self.cycle_lengths)

    @property
    def total_time(self) -> float:
        return float(self.cycle_lengths.sum())

    @staticmethod
    def merge(logs) -> "RegenerationLog":
        """Pool logs from independent workers (sum occupations, chain cycles)."""
        logs = list(logs)
        first = logs[0]
        for other in logs[1:]:
            same = (
                np.array_equal(first.labels, other.labels)
                if first.labels is not None
                else np.array_equal(first.edges, other.edges)
            )
            if not same:
                raise ValueError("cannot merge logs over different supports")
        return RegenerationLog(
            np.concatenate([l.cycle_lengths for l in logs]),
            np.sum([l.occupation for l in logs], axis=0),
            first.labels,
            first.edges,
            float(sum(l.boundary_time for l in logs)),
        )


def ray_occupation(x0: float, ends, edges) -> np.ndarray:
    """Exact time each path ``x0 -> end`` spends in each bin, summed over paths.

    With unit speed, time in ``[a, b)`` is the length of ``[x0, end] & [a, b)``.
    ``F(c) = sum_k max(end_k - c, 0)`` gives the per-bin totals as
    ``F(max(a, x0)) - F(max(b, x0))``.
    """
    e = np.sort(np.asarray(ends, dtype=float))
    tail_sums = np.concatenate([np.cumsum(e[::-1])[::-1], [0.0]])

    def F(c):
        i = np.searchsorted(e, c, side="right")
        n_above = e.size - i
        out = tail_sums[i] - np.where(n_above > 0, c, 0.0) * n_above
        return np.where(np.isinf(c), 0.0, out)

    lo = np.maximum(edges[:-1], x0)
    hi = np.maximum(edges[1:], x0)
    return np.maximum(F(lo) - F(hi), 0.0)


def simulate_resurrected(model, kappa, mu: RebirthMeasure, n_regen: int, rng, *,
                         bin_width: float = 0.05, x_max: Optional[float] = None,
                         edges=None, method: str = "inversion",
                         event_cap: int = EVENT_CAP) -> RegenerationLog:
    """Run ``n_regen`` cycles of the mu-resurrected process.

    ``model`` is a :class:`GeneratorMatrix` (occupation per state) or a
    :class:`RayModel` (occupation per fixed-width bin; ``mu`` must be a point
    mass, and ``edges`` overrides the default binning).
    """
    if n_regen < 1:
        raise ValueError("need at least one regeneration cycle")
    if isinstance(model, GeneratorMatrix):
        starts = mu.sample(rng, n_regen)
        batch, occ = run_killed_chain(model, kappa, starts, rng,
                                      event_cap=event_cap, occupation=True)
        boundary = float(batch.times[batch.touched_boundary].sum())
        return RegenerationLog(batch.times, occ, labels=model.labels.copy(),
                               boundary_time=boundary)
    if isinstance(model, RayModel):
        if not isinstance(kappa, PiecewisePolynomialRate):
            raise TypeError("ray model needs a PiecewisePolynomialRate")
        if not mu.is_point:
            raise ValueError("ray rebirth must be a point mass")
        x0 = float(mu.support[0])
        if edges is None:
            edges = ray.bin_edges(kappa, x0, bin_width, x_max)
        if method == "inversion":
            batch = sample_exits_ray_inversion(kappa, x0, n_regen, rng)
        elif method == "thinning":
            batch = sample_exits_ray_thinning(kappa, x0, n_regen, rng)
        else:
            raise ValueError(f"unknown method {method!r}")
        occ = ray_occupation(x0, batch.locations, edges)
        # binning rounding can leave ~1e-12 relative drift
        occ *= batch.times.sum() / occ.sum()
        return RegenerationLog(batch.times, occ, edges=np.asarray(edges, dtype=float))
    raise TypeError(f"unsupported model {type(model).__name__}")


def invariant_estimate(log: RegenerationLog) -> EmpiricalDistribution:
    """Occupation fractions: total time in each cell over total time."""
    if log.n_cycles == 0 or log.total_time <= 0:
        raise ValueError("regeneration log is empty")
    return EmpiricalDistribution.from_weights(
        log.occupation, labels=log.labels, edges=log.edges, n_samples=log.n_cycles
    )


def _bin_average_rate(kappa: PiecewisePolynomialRate, edges: np.ndarray) -> np.ndarray:
    a, b = edges[:-1], edges[1:]
    finite = np.isfinite(b)
    out = np.empty(a.size)
    out[finite] = kappa.hazard_between(a[finite], b[finite]) / (b[finite] - a[finite])
    out[~finite] = kappa(a[~finite])
    return out


def kappa_reweight(dist: EmpiricalDistribution, kappa) -> EmpiricalDistribution:
    """Normalized ``kappa * dist``, the predicted law of the kill location.

    On bins kappa is replaced by its exact average over each bin.
    """
    if dist.binned:
        k = _bin_average_rate(kappa, dist.edges)
    else:
        k = np.asarray(kappa(dist.labels), dtype=float)
    w = k * dist.mass
    if not w.sum() > 0:
        raise ValueError("kappa vanishes on the support of the distribution")
    return EmpiricalDistribution.from_weights(
        w, labels=dist.labels, edges=dist.edges, n_samples=dist.n_samples
    )


@dataclass(frozen=True)
class IntegrabilityCheck:
    """Diagnostics on whether the mean cycle length looks finite.

    ``running_mean_slope`` is the log-log slope of the running mean of cycle
    lengths over geometric checkpoints (near 0 for a finite mean, near
    ``1/alpha - 1`` for tails of index ``alpha < 1``).  ``boundary_share`` is
    the fraction of total time coming from cycles that reached a truncation
    boundary; when large, the mean is set by the truncation rather than by
    the model.
    """

    running_mean_slope: float
    boundary_share: float
    ok: bool
    reason: str = ""


def check_integrability(log: RegenerationLog, *, slope_tol: float = 0.25,
                        boundary_tol: float = 0.05, warn: bool = True) -> IntegrabilityCheck:
    c = log.cycle_lengths
    k = c.size
    slope = np.nan
    if k >= 64:
        cps = np.unique(np.geomspace(k / 16, k, 9).astype(int))
        running = np.cumsum(c)[cps - 1] / cps
        slope = float(np.polyfit(np.log(cps), np.log(running), 1)[0])
    share = log.boundary_time / log.total_time if log.total_time > 0 else 0.0
    reasons = []
    if slope > slope_tol:
        reasons.append(f"running mean of cycle lengths keeps growing (log-log slope {slope:.2f})")
    if share > boundary_tol:
        reasons.append(
            f"{share:.0%} of the time comes from cycles reaching the truncation boundary"
        )
    result = IntegrabilityCheck(slope, float(share), not reasons, "; ".join(reasons))
    if warn and not result.ok:
        warnings.warn(
            "mean time to killing appears infinite, invariant estimate is unreliable: "
            + result.reason,
            NonIntegrableWarning,
            stacklevel=2,
        )
    return result
