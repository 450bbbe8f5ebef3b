"""Independent reference computations used by the engine tests."""

import math

import numpy as np

from tmrmodel.model import ComposedCtmc


def rk4_transient(R, p0, t, hq=0.01):
    """pi(t) for d(pi)/dt = pi Q by classical fixed-step RK4 on a dense generator."""
    R = np.asarray(R, dtype=float).copy()
    np.fill_diagonal(R, 0.0)
    Q = R - np.diag(R.sum(axis=1))
    qmax = max(np.abs(np.diag(Q)).max(), 1e-300)
    steps = max(1, math.ceil(t * qmax / hq))
    h = t / steps
    A = h * Q
    A2 = A @ A
    # one RK4 step of a linear system is multiplication by this polynomial in hQ
    step = np.eye(len(Q)) + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24
    v = np.asarray(p0, dtype=float)
    for _ in range(steps):
        v = v @ step
    return v


def random_chain(rng, max_states=27, density=0.3, max_rate=10.0):
    n = int(rng.integers(2, max_states + 1))
    mask = rng.random((n, n)) < density
    R = np.where(mask, rng.uniform(0.0, max_rate, (n, n)), 0.0)
    np.fill_diagonal(R, 0.0)
    up = rng.random(n) < 0.6
    up[0] = True
    return ComposedCtmc.from_rate_matrix(R, labels={"up": up, "down": ~up}, initial=0)


def unrepaired_tmr(lam, t):
    return 3 * math.exp(-2 * lam * t) - 2 * math.exp(-3 * lam * t)


STEADY_LAMBDA1_MU10 = (10 / 13, 2.5 / 13, 0.5 / 13)  # over local states (3, 2, 1)
