"""Monte Carlo estimates of reliability and availability over a composed chain.

Trajectories follow the embedded jump chain (self-loops skipped) and are
advanced in lockstep across trials with numpy. Random streams come from the
counter-based Philox generator; chunk ``k`` of a run seeded with ``s`` uses
``SeedSequence(s).spawn(n_chunks)[k]``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .model import ComposedCtmc

CONFIDENCE = 0.99
CHUNK = 50_000


@dataclass(frozen=True)
class SimEstimate:
    metric: str
    estimate: float
    half_width: float
    lower: float
    upper: float
    trials: int
    seed: int

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def wilson_interval(successes: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    z = norm.ppf(0.5 + confidence / 2)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _jump_tables(c: ComposedCtmc):
    off = c.off_diagonal().tocsr()
    off.sort_indices()
    exit_ = np.asarray(off.sum(axis=1)).ravel()
    rows = np.repeat(np.arange(off.shape[0]), np.diff(off.indptr))
    cdf = np.zeros(off.nnz)
    for r in np.flatnonzero(exit_ > 0):
        lo, hi = off.indptr[r], off.indptr[r + 1]
        cdf[lo:hi] = np.cumsum(off.data[lo:hi]) / exit_[r]
        cdf[hi - 1] = 1.0
    # row r's CDF lives in (r, r + 1]; one searchsorted serves every row
    shifted = rows + cdf
    return exit_, shifted, off.indices


def _run_chunk(tables, init, up, T, n, seed_seq, trace=None):
    exit_, shifted, targets = tables
    rng = np.random.Generator(np.random.Philox(seed_seq))
    state = np.full(n, init, dtype=np.int64)
    t = np.zeros(n)
    up_time = np.zeros(n)
    ever_down = ~up[state]
    active = np.arange(n)
    while active.size:
        s = state[active]
        rate = exit_[s]
        with np.errstate(divide="ignore"):
            dt = rng.standard_exponential(active.size) / rate
        t_next = np.minimum(t[active] + dt, T)
        up_time[active] += (t_next - t[active]) * up[s]
        t[active] = t_next
        moving = t_next < T
        movers = active[moving]
        if movers.size:
            src = s[moving]
            u = rng.random(movers.size)
            pos = np.searchsorted(shifted, src + u, side="right")
            pos = np.minimum(pos, np.searchsorted(shifted, src + 1.0, side="left"))
            dst = targets[pos]
            if trace is not None:
                trace.append(np.stack([src, dst]))
            state[movers] = dst
            ever_down[movers] |= ~up[dst]
        active = movers
    return int((~ever_down).sum()), up_time / T


def simulate(c: ComposedCtmc, T: float, trials: int, seed: int, *, label: str = "up",
             workers: int = 1, trace: list | None = None) -> tuple[SimEstimate, SimEstimate]:
    """Estimate (reliability, availability) over [0, T] from ``trials`` trajectories."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    up = np.asarray(c.label(label), dtype=bool)
    tables = _jump_tables(c)
    sizes = [CHUNK] * (trials // CHUNK) + ([trials % CHUNK] if trials % CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))

    def job(k):
        return _run_chunk(tables, c.initial_index, up, float(T), sizes[k], seqs[k], trace)

    if workers > 1 and trace is None:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, range(len(sizes))))
    else:
        results = [job(k) for k in range(len(sizes))]

    survived = sum(r[0] for r in results)
    fractions = np.concatenate([r[1] for r in results])
    p = survived / trials
    lo, hi = wilson_interval(survived, trials)
    rel = SimEstimate("reliability", p, (hi - lo) / 2, lo, hi, trials, seed)

    z = norm.ppf(0.5 + CONFIDENCE / 2)
    mean = float(fractions.mean())
    sd = float(fractions.std(ddof=1)) if trials > 1 else 0.0
    half = z * sd / math.sqrt(trials)
    avail = SimEstimate("availability", mean, half, max(0.0, mean - half), min(1.0, mean + half),
                        trials, seed)
    return rel, avail
