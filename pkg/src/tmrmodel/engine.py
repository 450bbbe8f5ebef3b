"""Transient, reliability, availability and steady-state analysis by uniformization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order
from scipy.stats import poisson

from .model import ComposedCtmc

UNIFORMIZATION_FACTOR = 1.02
MAX_TERMS_PER_STEP = 20_000  # longer horizons are split into sub-intervals
DIRECT_SOLVE_LIMIT = 10_000


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TransientResult:
    t: float
    distribution: np.ndarray
    error_bound: float


def poisson_window(qt: float, eps: float) -> tuple[int, np.ndarray, float]:
    """Left truncation point, normalized Poisson(qt) weights, and the dropped mass (<= eps)."""
    if qt == 0:
        return 0, np.ones(1), 0.0
    left = int(poisson.ppf(eps / 2, qt))
    right = int(poisson.isf(eps / 2, qt)) + 1
    left = max(left - 1, 0)
    k = np.arange(left, right + 1)
    w = poisson.pmf(k, qt)
    total = w.sum()
    return left, w / total, max(0.0, 1.0 - total)


def _cumulative_terms(qt: float, eps: float) -> np.ndarray:
    """P(N > k) for k = 0..K with N ~ Poisson(qt) and sum_{k>K} P(N > k) <= eps*qt."""
    if qt == 0:
        return np.zeros(1)
    k = int(poisson.isf(eps, qt)) + 1
    while qt * poisson.sf(k - 1, qt) - k * poisson.sf(k, qt) > eps * qt:
        k += max(1, int(math.sqrt(qt)))
    cum = poisson.sf(np.arange(k + 1), qt)
    return cum * (qt / cum.sum())  # the full series sums to E[N] = qt


def _check(c: ComposedCtmc, eps: float):
    if not eps > 0:
        raise NumericalError("eps must be positive")
    data = c.rate_matrix.data
    if data.size and not np.all(np.isfinite(data)):
        raise NumericalError("non-finite rates")


def _uniformized(off: sp.csr_matrix):
    """(P, Lambda) with P = I + Q/Lambda as a transposed operator for row vectors."""
    exit_ = np.asarray(off.sum(axis=1)).ravel()
    lam = UNIFORMIZATION_FACTOR * exit_.max() if exit_.size else 0.0
    if lam == 0:
        return None, 0.0
    P = off / lam + sp.diags(1.0 - exit_ / lam)
    return P.T.tocsr(), lam


def _steps(qt: float, eps: float) -> tuple[int, float]:
    n = max(1, math.ceil(qt / MAX_TERMS_PER_STEP))
    return n, eps / n


def _propagate(PT, lam, v, t, eps, integrate=False):
    """Advance v over [0, t]; optionally also return the integral of v over [0, t]."""
    integral = np.zeros_like(v) if integrate else None
    if PT is None or t == 0:
        if integrate:
            integral = v * t
        return v.copy(), 0.0, integral
    nsteps, eps_step = _steps(lam * t, eps)
    h = t / nsteps
    qt = lam * h
    left, weights, dropped = poisson_window(qt, eps_step)
    cum = _cumulative_terms(qt, eps_step) if integrate else np.zeros(0)
    last = max(left + len(weights) - 1, len(cum) - 1)
    err = 0.0
    for _ in range(nsteps):
        out = np.zeros_like(v)
        acc = np.zeros_like(v) if integrate else None
        term = v
        for k in range(last + 1):
            if k >= left and k - left < len(weights):
                out += weights[k - left] * term
            if integrate and k < len(cum):
                acc += cum[k] * term
            if k < last:
                term = PT @ term
        if integrate:
            integral += acc / lam
        err += dropped * v.sum()
        v = out
    return v, err, integral


def initial_distribution(c: ComposedCtmc) -> np.ndarray:
    v = np.zeros(c.n_states)
    v[c.initial_index] = 1.0
    return v


def transient(c: ComposedCtmc, t: float, init: np.ndarray | None = None,
              eps: float = 1e-10) -> TransientResult:
    """Distribution at time t via uniformization, with the truncation error bound."""
    _check(c, eps)
    if t < 0:
        raise NumericalError("t must be nonnegative")
    v = initial_distribution(c) if init is None else np.asarray(init, dtype=float).copy()
    if t == 0:
        return TransientResult(0.0, v, 0.0)
    PT, lam = _uniformized(c.off_diagonal())
    pi, err, _ = _propagate(PT, lam, v, t, eps)
    return TransientResult(float(t), pi, err)


def _absorbing(c: ComposedCtmc, keep: np.ndarray) -> sp.csr_matrix:
    """Off-diagonal rates with every state outside ``keep`` made absorbing."""
    off = c.off_diagonal()
    return (sp.diags(keep.astype(float)) @ off).tocsr()


def reliability(c: ComposedCtmc, T: float, eps: float = 1e-10, label: str = "up") -> float:
    """P(the chain stays in ``label`` states throughout [0, T])."""
    _check(c, eps)
    good = np.asarray(c.label(label), dtype=bool)
    if not good.any():
        raise NumericalError(f"no {label} states")
    v = initial_distribution(c)
    if not good[c.initial_index]:
        return 0.0
    PT, lam = _uniformized(_absorbing(c, good))
    pi, _, _ = _propagate(PT, lam, v, T, eps)
    return float(np.clip(pi[good].sum(), 0.0, 1.0))


def reachability(c: ComposedCtmc, T: float, eps: float = 1e-10, label: str = "down") -> float:
    """P(some ``label`` state is visited within [0, T])."""
    target = np.asarray(c.label(label), dtype=bool)
    v = initial_distribution(c)
    if target[c.initial_index]:
        return 1.0
    PT, lam = _uniformized(_absorbing(c, ~target))
    pi, _, _ = _propagate(PT, lam, v, T, eps)
    return float(np.clip(pi[target].sum(), 0.0, 1.0))


def occupation(c: ComposedCtmc, T: float, eps: float = 1e-10) -> np.ndarray:
    """Expected time spent in each state over [0, T]."""
    _check(c, eps)
    PT, lam = _uniformized(c.off_diagonal())
    _, _, integral = _propagate(PT, lam, initial_distribution(c), T, eps, integrate=True)
    return integral


def availability(c: ComposedCtmc, T: float, eps: float = 1e-10, label: str = "up") -> float:
    """Expected fraction of [0, T] spent in ``label`` states."""
    if not T > 0:
        raise NumericalError("availability needs T > 0")
    occ = occupation(c, T, eps)
    return float(np.clip(occ[np.asarray(c.label(label), dtype=bool)].sum() / T, 0.0, 1.0))


def steady_state(c: ComposedCtmc, tol: float = 1e-12) -> np.ndarray:
    """Solve pi Q = 0 with sum(pi) = 1.

    pi is pinned to 1 at the initial state and that equation dropped; every
    scrub edge points into the initial state, so this also removes the one
    dense column before factorization.
    """
    Q = c.generator()
    n = Q.shape[0]
    if n == 1:
        return np.ones(1)
    k = c.initial_index
    keep = np.flatnonzero(np.arange(n) != k)
    At = Q.T.tocsr()
    A = At[keep][:, keep].tocsc()
    b = -np.asarray(At[keep][:, [k]].todense()).ravel()
    if n <= DIRECT_SOLVE_LIMIT:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                x = spla.spsolve(A, b)
            except spla.MatrixRankWarning:
                raise NumericalError("singular generator; chain is not irreducible") from None
    else:
        x, info = spla.lgmres(A, b, rtol=1e-14, maxiter=5000)
        if info != 0:
            raise NumericalError(f"iterative steady-state solve did not converge ({info})")
    pi = np.empty(n)
    pi[k] = 1.0
    pi[keep] = x
    if not np.all(np.isfinite(pi)) or pi.sum() <= 0:
        raise NumericalError("singular generator; chain is not irreducible")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    scale = max(1.0, abs(Q).max())
    resid = np.abs(Q.T @ pi).max()
    if resid > 1e-9 * scale:
        raise NumericalError(f"steady-state residual {resid:.3g} too large")
    return pi


def check_scrub_recoverability(c: ComposedCtmc, target_label: str = "operational") -> bool:
    """True iff every reachable state has a positive-rate step into the target state(s)."""
    target = np.asarray(c.label(target_label), dtype=bool)
    R = c.rate_matrix
    reach = breadth_first_order(R, c.initial_index, directed=True, return_predecessors=False)
    into = np.asarray(R[:, np.flatnonzero(target)].sum(axis=1)).ravel() > 0
    return bool(into[reach].all())
