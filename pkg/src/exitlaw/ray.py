"""Closed-form laws for the unit-velocity ray started at ``x0``.

With integrated hazard ``H(x) = int_{x0}^x kappa``, the kill position has
survival function ``exp(-H(x))`` and the invariant law of the
``delta_{x0}``-resurrected flow has density ``exp(-H(x)) / Z`` on
``[x0, inf)`` with ``Z = E[tau]``.  Only ``Z`` and the occupation CDF need
quadrature.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .process import PiecewisePolynomialRate


def survival(kappa: PiecewisePolynomialRate, x0: float, x):
    x = np.asarray(x, dtype=float)
    h = kappa.hazard(np.maximum(x, x0)) - kappa.hazard(x0)
    return np.where(x < x0, 1.0, np.exp(-h))


def exit_cdf(kappa, x0):
    """CDF of the kill position ``Y_{tau-}``."""
    return lambda x: 1.0 - survival(kappa, x0, x)


def exit_bin_masses(kappa, x0, edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    finite = np.isfinite(edges)
    s = np.zeros(edges.size)
    s[finite] = survival(kappa, x0, edges[finite])
    return -np.diff(s)


def _segments(kappa, a, b):
    """Split ``[a, b]`` at the rate's breakpoints so quad sees smooth pieces."""
    inner = kappa.breakpoints[(kappa.breakpoints > a) & (kappa.breakpoints < b)]
    return np.concatenate([[a], inner, [b]])


def _integrate_survival(kappa, x0, a, b) -> float:
    pts = _segments(kappa, a, b)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = quad(lambda z: float(survival(kappa, x0, z)), lo, hi,
                      epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    return total


def mean_exit_time(kappa, x0) -> float:
    """``E[tau] = int_{x0}^inf exp(-H(x)) dx``, the occupation normalizer."""
    return occupation_mass_between(kappa, x0, x0, np.inf, normalize=False)


def occupation_mass_between(kappa, x0, a, b, *, normalize=True) -> float:
    a = max(a, x0)
    if b <= a:
        return 0.0
    last = kappa.breakpoints[-1]
    if np.isinf(b):
        head = _integrate_survival(kappa, x0, a, max(a, last)) if a < last else 0.0
        val, _ = quad(lambda z: float(survival(kappa, x0, z)), max(a, last), np.inf,
                      epsabs=1e-14, epsrel=1e-12, limit=200)
        total = head + val
    else:
        total = _integrate_survival(kappa, x0, a, b)
    return total / mean_exit_time(kappa, x0) if normalize else total


def occupation_bin_masses(kappa, x0, edges) -> np.ndarray:
    z = mean_exit_time(kappa, x0)
    raw = np.array([occupation_mass_between(kappa, x0, a, b, normalize=False)
                    for a, b in zip(edges[:-1], edges[1:])])
    return raw / z


def occupation_cdf(kappa, x0):
    z = mean_exit_time(kappa, x0)
    return np.vectorize(
        lambda x: occupation_mass_between(kappa, x0, x0, x, normalize=False) / z
    )


def tail_cutoff(kappa, x0: float, mass: float = 1e-6) -> float:
    """Position beyond which the resurrected invariant law has mass below ``mass``."""
    z = mean_exit_time(kappa, x0)

    def tail(x):
        return occupation_mass_between(kappa, x0, x, np.inf, normalize=False) / z

    step = 1.0
    hi = x0 + step
    while tail(hi) >= mass:
        step *= 2.0
        hi = x0 + step
    lo = x0 + step / 2 if step > 1.0 else x0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if tail(mid) >= mass:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    return hi


def bin_edges(kappa, x0: float, width: float = 0.05, x_max: float | None = None) -> np.ndarray:
    """Fixed-width bins on ``[0, x_max)`` plus an overflow bin ``[x_max, inf)``.

    ``x_max`` defaults to the tail cutoff at mass 1e-6, rounded up to a
    whole number of bins.
    """
    if width <= 0:
        raise ValueError("bin width must be positive")
    if x_max is None:
        x_max = tail_cutoff(kappa, x0)
    nb = max(1, math.ceil(round(x_max / width, 9)))
    edges = np.round(np.arange(nb + 1) * width, 12)
    return np.append(edges, np.inf)
