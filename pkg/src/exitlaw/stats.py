"""Empirical distributions and the goodness-of-fit tests used for cross-validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaincc, kolmogorov

from .errors import DegenerateMarginalError

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Probability masses on state labels or on bins.

    Exactly one of ``labels`` (discrete support) and ``edges`` (bins
    ``[edges[i], edges[i+1])``; the last edge may be ``inf``) is set.
    ``n_samples`` is the number of draws behind the masses, 0 for exact laws.
    """

    mass: np.ndarray
    labels: Optional[np.ndarray] = None
    edges: Optional[np.ndarray] = None
    n_samples: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mass", np.asarray(self.mass, dtype=float))
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels))
        if self.edges is not None:
            object.__setattr__(self, "edges", np.asarray(self.edges, dtype=float))
        self.validate()

    def validate(self):
        m = self.mass
        if (self.labels is None) == (self.edges is None):
            raise ValueError("give exactly one of labels or edges")
        if m.ndim != 1 or m.size == 0:
            raise ValueError("empty support")
        if self.labels is not None and self.labels.shape != m.shape:
            raise ValueError("one label per mass required")
        if self.edges is not None:
            if self.edges.shape != (m.size + 1,):
                raise ValueError("need len(mass) + 1 bin edges")
            if np.any(np.diff(self.edges) <= 0):
                raise ValueError("bin edges must be strictly increasing")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("masses must be finite and nonnegative")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {m.sum()!r}, not 1")

    @property
    def binned(self) -> bool:
        return self.edges is not None

    def __len__(self):
        return self.mass.size

    @classmethod
    def from_weights(cls, weights, *, labels=None, edges=None, n_samples=0):
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValueError("weights have no positive mass")
        return cls(w / total, labels=labels, edges=edges, n_samples=n_samples)

    @classmethod
    def from_samples(cls, samples, labels):
        """Relative frequencies of ``samples`` over the given label set."""
        labels = np.asarray(labels)
        samples = np.asarray(samples)
        order = np.argsort(labels)
        pos = np.searchsorted(labels[order], samples)
        pos = np.minimum(pos, labels.size - 1)
        if np.any(labels[order][pos] != samples):
            raise ValueError("samples fall outside the label set")
        counts = np.bincount(order[pos], minlength=labels.size)
        return cls(counts / samples.size, labels=labels, n_samples=samples.size)

    @classmethod
    def from_binned_samples(cls, samples, edges):
        edges = np.asarray(edges, dtype=float)
        samples = np.asarray(samples, dtype=float)
        if np.any(samples < edges[0]) or np.any(samples >= edges[-1]):
            raise ValueError("samples fall outside the binning range")
        idx = np.searchsorted(edges, samples, side="right") - 1
        counts = np.bincount(idx, minlength=edges.size - 1)
        return cls(counts / samples.size, edges=edges, n_samples=samples.size)

    def counts(self) -> np.ndarray:
        return np.rint(self.mass * self.n_samples).astype(np.int64)

    def same_support(self, other: "EmpiricalDistribution") -> bool:
        if self.binned != other.binned or len(self) != len(other):
            return False
        a, b = (self.edges, other.edges) if self.binned else (self.labels, other.labels)
        return bool(np.array_equal(a, b))


def tv_distance(p: EmpiricalDistribution, q: EmpiricalDistribution) -> float:
    """Total variation distance, half the L1 distance between the masses."""
    if not p.same_support(q):
        raise ValueError("distributions are on different supports")
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


@dataclass(frozen=True)
class StatResult:
    statistic: float
    p_value: float
    df: Optional[int] = None

    def __iter__(self):
        return iter((self.statistic, self.p_value))


def ks_test(samples, cdf: Callable) -> StatResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value K(sqrt(n) D)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 samples, got {n}")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)))
    return StatResult(d, float(kolmogorov(np.sqrt(n) * d)))


def ks_2samp(a, b) -> StatResult:
    """Two-sample Kolmogorov-Smirnov test, asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n, m = a.size, b.size
    if min(n, m) < 10:
        raise ValueError("need at least 10 samples in each group")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / m
    d = float(np.abs(fa - fb).max())
    return StatResult(d, float(kolmogorov(np.sqrt(n * m / (n + m)) * d)))


def chi2_sf(stat: float, df: int) -> float:
    """Chi-square survival function via the regularized upper incomplete gamma."""
    if np.isinf(stat):
        return 0.0
    return float(gammaincc(df / 2.0, stat / 2.0))


def pool_cells(observed, expected, min_expected: float = 5.0):
    """Merge cells until each has expected count >= ``min_expected``.

    Cells are taken in order of increasing expected count and accumulated
    into one pooled cell; if the pooled cell is still short it absorbs the
    smallest remaining cell.  Returns ``(observed, expected)`` arrays.
    """
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    # ties broken by observed count so the pooling does not depend on cell order
    order = np.lexsort((obs, exp))
    small = order[exp[order] < min_expected]
    big = order[exp[order] >= min_expected]
    if small.size == 0:
        return obs, exp
    po, pe = obs[small].sum(), exp[small].sum()
    while pe < min_expected and big.size:
        po += obs[big[0]]
        pe += exp[big[0]]
        big = big[1:]
    keep = np.sort(big)
    if pe < min_expected:
        return np.array([po]), np.array([pe])
    return np.append(obs[keep], po), np.append(exp[keep], pe)


def chi_square_test(observed, expected_probs, *, min_expected: float = 5.0) -> StatResult:
    """Pearson goodness-of-fit test of counts against cell probabilities."""
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    if obs.shape != p.shape:
        raise ValueError("observed and expected must align")
    n = obs.sum()
    impossible = (p == 0) & (obs > 0)
    if impossible.any():
        return StatResult(np.inf, 0.0, None)
    obs, exp = pool_cells(obs[p > 0], n * p[p > 0], min_expected)
    if obs.size < 2:
        raise ValueError("fewer than 2 cells with expected count >= 5 after pooling")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = obs.size - 1
    return StatResult(stat, chi2_sf(stat, df), df)


def _quantile_bins(values, n_bins):
    edges = np.unique(np.quantile(values, np.linspace(0, 1, n_bins + 1)[1:-1]))
    return np.searchsorted(edges, values, side="right")


def independence_test(times, locations, time_bins: int = 4, location_bins: int = 4) -> StatResult:
    """Chi-square test that kill time and kill location are independent.

    Times are cut at empirical quantiles into equal-count bins.  Locations
    with at most ``location_bins`` distinct values are used as categories,
    otherwise they are also cut at empirical quantiles.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(locations)
    n = t.size
    if n < 50 * time_bins * location_bins:
        raise ValueError(f"need at least {50 * time_bins * location_bins} pairs, got {n}")
    ti = _quantile_bins(t, time_bins)
    cats = np.unique(x)
    if cats.size <= location_bins:
        xi = np.searchsorted(cats, x)
    else:
        xi = _quantile_bins(x.astype(float), location_bins)
    table = np.zeros((ti.max() + 1, xi.max() + 1))
    np.add.at(table, (ti, xi), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if min(table.shape) < 2:
        raise DegenerateMarginalError(
            f"contingency table is {table.shape[0]}x{table.shape[1]}; a marginal is degenerate"
        )
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    stat = float(np.sum((table - expected) ** 2 / expected))
    df = (table.shape[0] - 1) * (table.shape[1] - 1)
    return StatResult(stat, chi2_sf(stat, df), df)


def lag1_autocorrelation(x) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    return float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
