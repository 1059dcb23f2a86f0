"""Unkilled dynamics and killing rates.

Two dynamics classes are supported: finite continuous-time Markov chains given
by a conservative Q-matrix, and the deterministic unit-velocity flow on the
half line ``[0, inf)``.  Killing rates are either a per-state table (chains)
or a piecewise polynomial in position (ray), for which integrated hazards and
local maxima have closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, KillingNotAlmostSureError

ROW_SUM_TOL = 1e-12
HAZARD_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Q-matrix of a finite continuous-time Markov chain.

    Parameters
    ----------
    q : array_like, shape (n, n)
        Transition rates; ``q[i, j]`` for ``i != j`` is the rate of jumping
        from state ``i`` to state ``j``.
    labels : array_like of int, optional
        Integer label of each state (e.g. its position on Z after
        truncation).  Defaults to ``0..n-1``.
    boundary : sequence of int, optional
        Labels of artificial truncation boundary states, if any.

    Construction does not validate; see :func:`validate_generator`.
    """

    q: np.ndarray
    labels: np.ndarray = None
    boundary: tuple = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = _frozen(self.q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"q must be square, got shape {q.shape}")
        labels = np.arange(q.shape[0]) if self.labels is None else self.labels
        labels = _frozen(labels, dtype=np.int64)
        if labels.shape != (q.shape[0],):
            raise ValueError("one label per state required")
        if len(set(labels.tolist())) != len(labels):
            raise ValueError("state labels must be distinct")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "boundary", tuple(int(b) for b in self.boundary))
        object.__setattr__(self, "_index", {int(l): i for i, l in enumerate(labels)})

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        """Total jump rate out of each state, ``-q[i, i]``."""
        return -np.diag(self.q)

    def index_of(self, label) -> int:
        try:
            return self._index[int(label)]
        except KeyError:
            raise DomainError(f"state {label!r} is not in the chain") from None

    def indices_of(self, labels) -> np.ndarray:
        return np.array([self.index_of(l) for l in np.atleast_1d(labels)], dtype=np.int64)

    @property
    def boundary_indices(self) -> np.ndarray:
        return self.indices_of(self.boundary) if self.boundary else np.zeros(0, dtype=np.int64)

    def __repr__(self):
        return f"GeneratorMatrix(n={self.n}, labels=[{self.labels[0]}..{self.labels[-1]}])"


@dataclass(frozen=True)
class GeneratorCheck:
    """Outcome of :func:`validate_generator`; truthy iff the matrix is valid."""

    ok: bool
    message: str = ""
    row: Optional[int] = None
    col: Optional[int] = None

    def __bool__(self):
        return self.ok


def validate_generator(Q: GeneratorMatrix) -> GeneratorCheck:
    """Check the Q-matrix invariants, reporting the first violation found.

    Rows are scanned in order; within a row the sign of the off-diagonal
    entries is checked before the row sum.
    """
    q = Q.q
    if Q.n < 2:
        return GeneratorCheck(False, f"need at least 2 states, got {Q.n}")
    if not np.all(np.isfinite(q)):
        i, j = np.argwhere(~np.isfinite(q))[0]
        return GeneratorCheck(False, f"non-finite entry q[{i}][{j}]", int(i), int(j))
    for i in range(Q.n):
        row = q[i]
        for j in np.flatnonzero(row < 0):
            if j != i:
                return GeneratorCheck(
                    False, f"negative off-diagonal q[{i}][{j}] = {row[j]:g}", i, int(j)
                )
        s = row.sum()
        if abs(s) > ROW_SUM_TOL:
            return GeneratorCheck(False, f"row {i} sums to {s:g}, not 0", i)
    return GeneratorCheck(True)


def ssrw_generator(lo: int, hi: int, rate: float = 1.0) -> GeneratorMatrix:
    """Simple symmetric random walk on ``{lo, ..., hi}`` with reflecting ends.

    Interior states jump to each neighbour at ``rate``; the end states only
    jump inward.
    """
    if hi <= lo:
        raise ValueError("need lo < hi")
    n = hi - lo + 1
    q = np.zeros((n, n))
    i = np.arange(n - 1)
    q[i, i + 1] = rate
    q[i + 1, i] = rate
    q[np.diag_indices(n)] = -q.sum(axis=1)
    return GeneratorMatrix(q, labels=np.arange(lo, hi + 1), boundary=(lo, hi))


def path_generator(n: int, rate: float = 1.0) -> GeneratorMatrix:
    """Nearest-neighbour chain on ``0..n-1`` (a truncated walk without labels)."""
    g = ssrw_generator(0, n - 1, rate)
    return GeneratorMatrix(g.q)


def random_generator(n: int, rng: np.random.Generator, density: float = 0.5) -> GeneratorMatrix:
    """Random irreducible Q-matrix on ``n`` states.

    A directed cycle through all states guarantees irreducibility; other
    off-diagonal entries are present with probability ``density`` and have
    Exp(1) rates.
    """
    q = np.where(rng.random((n, n)) < density, rng.exponential(size=(n, n)), 0.0)
    idx = np.arange(n)
    q[idx, (idx + 1) % n] += rng.uniform(0.1, 1.0, size=n)
    q[idx, idx] = 0.0
    q[idx, idx] = -q.sum(axis=1)
    return GeneratorMatrix(q)


class RateFunction:
    """Killing rate kappa.  Subclasses: :class:`RateTable`, :class:`PiecewisePolynomialRate`."""

    kind = None

    def __call__(self, x):
        raise NotImplementedError


class RateTable(RateFunction):
    """Per-state killing rates keyed by state label."""

    kind = "table"

    def __init__(self, labels: Sequence[int], values: Sequence[float]):
        labels = _frozen(labels, dtype=np.int64)
        values = _frozen(values)
        if labels.shape != values.shape or labels.ndim != 1:
            raise ValueError("labels and values must be 1-d of equal length")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("killing rates must be finite and nonnegative")
        self.labels = labels
        self.values = values
        self._lookup = {int(l): float(v) for l, v in zip(labels, values)}
        if len(self._lookup) != len(labels):
            raise ValueError("duplicate state labels")

    @classmethod
    def from_mapping(cls, rates: dict) -> "RateTable":
        keys = sorted(rates)
        return cls(keys, [rates[k] for k in keys])

    @classmethod
    def on(cls, Q: GeneratorMatrix, values) -> "RateTable":
        """Rates aligned with the states of ``Q`` (scalar broadcasts)."""
        return cls(Q.labels, np.broadcast_to(np.asarray(values, dtype=float), (Q.n,)))

    def __call__(self, x):
        if np.ndim(x) == 0:
            try:
                return self._lookup[int(x)]
            except (KeyError, TypeError):
                raise DomainError(f"state {x!r} has no killing rate") from None
        return np.array([self(v) for v in np.asarray(x).ravel()]).reshape(np.shape(x))

    def vector(self, Q: GeneratorMatrix) -> np.ndarray:
        """Rates in the state order of ``Q``."""
        return np.array([self(l) for l in Q.labels], dtype=float)

    def __repr__(self):
        return f"RateTable({dict(zip(self.labels.tolist(), self.values.tolist()))})"


def _critical_points(p: Polynomial, a: float, b: float) -> np.ndarray:
    if p.degree() < 2:
        return np.zeros(0)
    r = p.deriv().roots()
    r = r[np.abs(r.imag) <= 1e-12 * np.maximum(1.0, np.abs(r.real))].real
    return r[(r > a) & (r < b)]


def _trimmed(coef: np.ndarray) -> Polynomial:
    """Drop trailing coefficients that are round-off relative to the largest one."""
    if coef.ndim != 1 or coef.size == 0 or not np.all(np.isfinite(coef)):
        raise ValueError("coefficients must be a nonempty finite list")
    return Polynomial(coef).trim(tol=1e-15 * float(np.abs(coef).max()))


class PiecewisePolynomialRate(RateFunction):
    """Piecewise-polynomial killing rate on ``[0, inf)``.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing, starting at 0.  Piece ``i`` covers
        ``[breakpoints[i], breakpoints[i+1])``; the last piece extends to
        infinity.
    coefficients : sequence of sequence of float
        One coefficient list per piece, ascending powers of the position
        ``x`` (not of ``x - breakpoint``).
    """

    kind = "piecewise-polynomial"

    def __init__(self, breakpoints: Sequence[float], coefficients: Sequence[Sequence[float]]):
        bp = _frozen(breakpoints)
        if bp.ndim != 1 or len(bp) == 0 or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0) or not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite and strictly increasing")
        if len(coefficients) != len(bp):
            raise ValueError("need one coefficient list per piece")
        self.breakpoints = bp
        self.pieces = tuple(_trimmed(np.asarray(c, dtype=float)) for c in coefficients)
        self._upper = np.append(bp[1:], np.inf)
        for i, p in enumerate(self.pieces):
            lo = self._extreme(p, bp[i], self._upper[i], np.min)
            if lo < -1e-12 * max(1.0, float(np.max(np.abs(p.coef)))):
                raise ValueError(f"piece {i} takes negative values (min {lo:g})")
        self._antiderivs = tuple(p.integ() for p in self.pieces)
        # cumulative hazard at each breakpoint
        steps = [a(self._upper[i]) - a(bp[i]) for i, a in enumerate(self._antiderivs[:-1])]
        self._cum = np.concatenate([[0.0], np.cumsum(steps)])

    @classmethod
    def constant(cls, c: float) -> "PiecewisePolynomialRate":
        return cls([0.0], [[c]])

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "PiecewisePolynomialRate":
        return cls([0.0], [coefficients])

    @staticmethod
    def _extreme(p: Polynomial, a: float, b: float, pick) -> float:
        if np.isinf(b):
            if p.degree() >= 1:
                lead = p.coef[-1]
                if (lead < 0) == (pick is np.min):
                    return -np.inf if pick is np.min else np.inf
            cands = np.concatenate([[a], _critical_points(p, a, np.inf)])
        else:
            cands = np.concatenate([[a, b], _critical_points(p, a, b)])
        return float(pick(p(cands)))

    @property
    def total_hazard_finite(self) -> bool:
        """True iff the integral of kappa over ``[0, inf)`` converges."""
        last = self.pieces[-1]
        return last.degree() == 0 and last.coef[0] == 0.0

    def _piece(self, x):
        return np.searchsorted(self.breakpoints, x, side="right") - 1

    def _check_domain(self, x):
        if np.any(np.asarray(x) < 0) or np.any(np.isnan(x)):
            raise DomainError("ray positions must be >= 0")

    def __call__(self, x):
        self._check_domain(x)
        x = np.asarray(x, dtype=float)
        k = self._piece(x)
        out = np.empty_like(x)
        for i, p in enumerate(self.pieces):
            m = k == i
            if np.any(m):
                out[m] = p(x[m])
        return float(out) if out.ndim == 0 else out

    def hazard(self, x):
        """Integrated hazard ``int_0^x kappa(z) dz``."""
        self._check_domain(x)
        x = np.asarray(x, dtype=float)
        k = self._piece(x)
        out = np.empty_like(x)
        for i, a in enumerate(self._antiderivs):
            m = k == i
            if np.any(m):
                out[m] = self._cum[i] + a(x[m]) - a(self.breakpoints[i])
        return float(out) if out.ndim == 0 else out

    def hazard_between(self, a, b):
        return self.hazard(b) - self.hazard(a)

    def inverse_hazard(self, levels, tol: float = HAZARD_TOL) -> np.ndarray:
        """Position ``x`` with ``hazard(x) == level``, elementwise.

        Brackets each level inside one piece, then runs Newton steps on the
        antiderivative, falling back to bisection whenever a step leaves the
        bracket.  Converges to ``|hazard(x) - level| <= tol``.
        """
        L = np.atleast_1d(np.asarray(levels, dtype=float))
        if np.any(L < 0):
            raise ValueError("hazard levels must be nonnegative")
        if self.total_hazard_finite:
            if np.any(L >= self._cum[-1]):
                raise KillingNotAlmostSureError(
                    f"total integrated hazard is finite ({self._cum[-1]:g})"
                )
        k = np.searchsorted(self._cum, L, side="right") - 1
        lo = self.breakpoints[k].copy()
        hi = self._upper[k].copy()
        open_end = np.isinf(hi)
        idx = np.flatnonzero(open_end)
        if idx.size:
            step = np.ones(idx.size)
            h = lo[idx] + step
            while True:
                short = self.hazard(h) < L[idx]
                if not short.any():
                    break
                lo[idx[short]] = h[short]
                step[short] *= 2.0
                h[short] += step[short]
            hi[idx] = h
        x = 0.5 * (lo + hi)
        for _ in range(400):
            f = self.hazard(x) - L
            done = np.abs(f) <= tol
            if done.all():
                break
            lo = np.where(f < 0, x, lo)
            hi = np.where(f > 0, x, hi)
            d = self(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = x - f / d
            ok = (d > 0) & (newton > lo) & (newton < hi)
            x_next = np.where(ok, newton, 0.5 * (lo + hi))
            stuck = hi - lo <= 4 * np.spacing(np.maximum(np.abs(hi), 1.0))
            x = np.where(done | stuck, x, x_next)
            if np.all(done | stuck):
                break
        return x

    def bound_on(self, a: float, b: float) -> float:
        """Exact maximum of kappa over ``[a, b]``."""
        if not (0 <= a < b < np.inf):
            raise ValueError(f"invalid interval [{a}, {b}]")
        best = 0.0
        interior = False
        first, last = self._piece(a), self._piece(b)
        for i in range(first, last + 1):
            lo = max(a, self.breakpoints[i])
            hi = min(b, self._upper[i])
            p = self.pieces[i]
            ends = float(np.max(p(np.array([lo, hi]))))
            crit = _critical_points(p, lo, hi)
            inner = float(np.max(p(crit))) if crit.size else -np.inf
            if ends > best:
                best, interior = ends, False
            if inner > best:
                best, interior = inner, True
        if interior:
            # critical points carry root-finding error
            best += 1e-13 * abs(best)
        return best

    def __repr__(self):
        pieces = ", ".join(
            f"[{b:g},{u:g}): {p.coef.tolist()}"
            for b, u, p in zip(self.breakpoints, self._upper, self.pieces)
        )
        return f"PiecewisePolynomialRate({pieces})"


@dataclass(frozen=True)
class RayModel:
    """Deterministic motion along ``[0, inf)`` at unit speed from ``start``."""

    start: float = 0.0

    def __post_init__(self):
        if not (self.start >= 0 and np.isfinite(self.start)):
            raise ValueError("start must be a finite position >= 0")

    velocity = 1.0

    def position(self, t):
        return self.start + np.asarray(t, dtype=float)


def eval_rate(kappa: RateFunction, x):
    """Killing rate at a state label (table) or position (ray)."""
    return kappa(x)


def rate_bound_on(kappa: RateFunction, a: float, b: float) -> float:
    """Upper bound on kappa over ``[a, b]``; exact for piecewise polynomials."""
    if not isinstance(kappa, PiecewisePolynomialRate):
        raise TypeError("local bounds are only defined for ray rates")
    return kappa.bound_on(a, b)
