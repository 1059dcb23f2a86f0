"""Exact linear algebra for finite killed chains.

With ``K = diag(kappa)`` the killed process has generator ``M = Q - K`` and
the resolvent at zero is ``R = (K - Q)^{-1}``.  Everything here reduces to
dense LU solves against ``K - Q``, a null-vector solve for the resurrected
chain, or a Perron iteration for the quasi-stationary pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._graph import jump_graph, reachable, strong_components, unkillable_states
from .errors import (
    ConvergenceError,
    InvalidGeneratorError,
    KillingNotAlmostSureError,
    ReducibleChainError,
)
from .process import GeneratorMatrix, RateTable, validate_generator

RESIDUAL_TOL = 1e-10


def _as_vector(kappa, Q: GeneratorMatrix) -> np.ndarray:
    if isinstance(kappa, RateTable):
        return kappa.vector(Q)
    k = np.asarray(kappa, dtype=float)
    if k.shape != (Q.n,):
        raise ValueError(f"expected {Q.n} killing rates, got shape {k.shape}")
    if np.any(k < 0):
        raise ValueError("killing rates must be nonnegative")
    return k


def _as_measure(mu, Q: GeneratorMatrix) -> np.ndarray:
    if hasattr(mu, "vector"):
        return mu.vector(Q)
    m = np.asarray(mu, dtype=float)
    if m.shape != (Q.n,):
        raise ValueError(f"expected a measure on {Q.n} states, got shape {m.shape}")
    if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must be a probability vector")
    return m


@dataclass(frozen=True, eq=False)
class KilledGenerator:
    """``M = Q - diag(kappa)``; generates the sub-Markovian semigroup ``exp(tM)``."""

    m: np.ndarray
    kappa: np.ndarray
    generator: GeneratorMatrix

    @property
    def lu_matrix(self) -> np.ndarray:
        """``diag(kappa) - Q = -M``, the matrix whose inverse is the resolvent."""
        return -self.m


def killed_generator(Q: GeneratorMatrix, kappa) -> KilledGenerator:
    check = validate_generator(Q)
    if not check:
        raise InvalidGeneratorError(check.message)
    k = _as_vector(kappa, Q)
    stuck = unkillable_states(Q.q, k)
    if stuck.any():
        bad = Q.labels[np.flatnonzero(stuck)][:5].tolist()
        raise KillingNotAlmostSureError(f"no positive killing rate reachable from states {bad}")
    m = Q.q - np.diag(k)
    m.setflags(write=False)
    return KilledGenerator(m, k, Q)


def resolvent_solve(Q: GeneratorMatrix, kappa, f) -> np.ndarray:
    """Solve ``(diag(kappa) - Q) g = f``, i.e. ``g = R f``.

    ``f`` may be a vector or a matrix of column right-hand sides.
    """
    km = killed_generator(Q, kappa)
    f = np.asarray(f, dtype=float)
    try:
        g = np.linalg.solve(km.lu_matrix, f)
    except np.linalg.LinAlgError as exc:
        raise KillingNotAlmostSureError("resolvent system is singular") from exc
    scale = max(np.abs(f).max(initial=0.0), np.finfo(float).tiny)
    resid = np.abs(km.lu_matrix @ g - f).max(initial=0.0)
    if not np.isfinite(resid) or resid > RESIDUAL_TOL * scale:
        raise KillingNotAlmostSureError(f"resolvent solve residual {resid:.3g} too large")
    return g


def _left_resolvent(Q, kappa, mu):
    """``mu^T R`` as a vector (the expected occupation measure from mu)."""
    km = killed_generator(Q, kappa)
    mu = _as_measure(mu, Q)
    try:
        occ = np.linalg.solve(km.lu_matrix.T, mu)
    except np.linalg.LinAlgError as exc:
        raise KillingNotAlmostSureError("resolvent system is singular") from exc
    return occ, km.kappa


def exit_law_exact(Q: GeneratorMatrix, kappa, mu) -> np.ndarray:
    """Law of the pre-kill state from initial law ``mu``: ``mu^T R diag(kappa)``."""
    occ, k = _left_resolvent(Q, kappa, mu)
    return np.maximum(occ * k, 0.0)


def mean_exit_time_exact(Q: GeneratorMatrix, kappa, mu) -> float:
    """``E_mu[tau] = mu^T R 1``."""
    occ, _ = _left_resolvent(Q, kappa, mu)
    return float(occ.sum())


def resurrected_generator(Q: GeneratorMatrix, kappa, mu) -> np.ndarray:
    """``Q - diag(kappa) + kappa mu^T``: killed mass is reinjected according to mu."""
    k = _as_vector(kappa, Q)
    mu = _as_measure(mu, Q)
    return Q.q - np.diag(k) + np.outer(k, mu)


def resurrected_invariant_exact(Q: GeneratorMatrix, kappa, mu) -> np.ndarray:
    """Invariant law of the mu-resurrected chain by a null-vector solve.

    Restricts to the states reachable from the support of ``mu``, requires
    that restriction to be a single communicating class, and solves
    ``pi^T Q_res = 0`` with one balance equation replaced by ``sum(pi) = 1``.
    Unreachable states get mass zero.
    """
    qres = resurrected_generator(Q, kappa, mu)
    mu_vec = _as_measure(mu, Q)
    live = reachable(jump_graph(qres), np.flatnonzero(mu_vec > 0))
    sub = np.flatnonzero(live)
    qs = qres[np.ix_(sub, sub)]
    classes = strong_components(jump_graph(qs))
    if len(classes) > 1:
        labelled = [Q.labels[sub[c]].tolist() for c in classes]
        raise ReducibleChainError(
            f"resurrected chain has {len(classes)} communicating classes", labelled
        )
    a = qs.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(sub.size)
    b[-1] = 1.0
    pi_sub = np.linalg.solve(a, b)
    resid = np.abs(pi_sub @ qs).max()
    if resid > RESIDUAL_TOL * max(1.0, np.abs(qs).max()):
        raise ConvergenceError(f"invariant solve residual {resid:.3g}")
    pi = np.zeros(Q.n)
    pi[sub] = np.maximum(pi_sub, 0.0)
    return pi / pi.sum()


@dataclass(frozen=True)
class QsdResult:
    """Quasi-stationary law ``pi`` and its killing rate ``theta``."""

    pi: np.ndarray
    theta: float
    iterations: int
    residual: float


def qsd_exact(Q: GeneratorMatrix, kappa, *, tol: float = 1e-12,
              max_iter: int = 100_000) -> QsdResult:
    """Left Perron eigenpair of ``M = Q - diag(kappa)``.

    Power iteration on ``P = I + hM`` with ``h = 0.5 / max|M_ii|``, which is
    entrywise nonnegative, so its dominant left eigenvector is the positive
    Perron vector of ``M``.  ``theta`` is the Rayleigh quotient
    ``-(pi M pi^T) / (pi pi^T)``; iteration stops once
    ``||pi M + theta pi||_inf <= tol * max|M_ii|``.
    """
    km = killed_generator(Q, kappa)
    m = km.m
    if len(strong_components(jump_graph(Q.q))) > 1:
        classes = [Q.labels[c].tolist() for c in strong_components(jump_graph(Q.q))]
        raise ReducibleChainError("killed generator is reducible", classes)
    scale = np.abs(np.diag(m)).max()
    h = 0.5 / scale
    p = np.eye(Q.n) + h * m
    pi = np.full(Q.n, 1.0 / Q.n)
    for it in range(1, max_iter + 1):
        pi = pi @ p
        pi /= pi.sum()
        if it % 10 == 0 or it == 1:
            pm = pi @ m
            theta = -float(pm @ pi) / float(pi @ pi)
            resid = float(np.abs(pm + theta * pi).max())
            if resid <= tol * scale:
                return QsdResult(pi, theta, it, resid)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def mixture_decomposition(Q: GeneratorMatrix, kappa, epsilon: float | None = None):
    """Exit law from the QSD as a mix of a residual-rate part and the QSD itself.

    With ``kappa >= epsilon > 0`` and ``theta' = theta - epsilon``, the exit
    law from the QSD ``pi`` is the mixture

        theta'/(theta'+eps) * E' + eps/(theta'+eps) * pi

    where ``E'`` is the exit law from ``pi`` of the chain killed at rate
    ``kappa - epsilon`` (which shares the QSD ``pi``).

    Returns ``(mixture, weights, (E', pi), qsd)``.
    """
    k = _as_vector(kappa, Q)
    eps = float(k.min()) if epsilon is None else float(epsilon)
    if not (0 < eps <= k.min()):
        raise ValueError(f"need 0 < epsilon <= min kappa = {k.min():g}")
    qsd = qsd_exact(Q, k)
    theta_p = qsd.theta - eps
    residual_k = k - eps
    if np.any(residual_k > 0):
        first = exit_law_exact(Q, residual_k, qsd.pi)
    else:
        # kappa constant: the residual rate is zero, all mass is on the QSD part
        first = np.zeros(Q.n)
        theta_p = 0.0
    w = np.array([theta_p, eps]) / (theta_p + eps)
    return w[0] * first + w[1] * qsd.pi, w, (first, qsd.pi), qsd
