import numpy as np
import pytest
from scipy.stats import binom

from tmrmodel import engine
from tmrmodel.builder import build_chain
from tmrmodel.model import PartitionRates
from tmrmodel.simulator import simulate, wilson_interval
from tmrmodel.sweep import design_chain


def test_no_upsets_means_certain_survival():
    c = build_chain([PartitionRates(0, 0.0)] * 2, 1e-3, "combined")
    rel, av = simulate(c, 1e6, 1000, 1)
    assert rel.estimate == 1.0 and av.estimate == 1.0


def test_single_partition_availability_within_ci():
    c = build_chain([PartitionRates(1, 1.0)], 10.0, "scu_only")
    T = 10.0
    _, av = simulate(c, T, 100_000, 42)
    assert av.covers(engine.availability(c, T))
    assert abs(av.estimate - 12.5 / 13) < 0.01


def test_same_seed_is_bitwise_identical():
    c = build_chain([PartitionRates(1, 0.3, 0.05, 0.05)] * 2, 2.0, "combined")
    assert simulate(c, 5.0, 3000, 9) == simulate(c, 5.0, 3000, 9)
    assert simulate(c, 5.0, 3000, 9) != simulate(c, 5.0, 3000, 10)


def test_worker_count_does_not_change_result(monkeypatch):
    import tmrmodel.simulator as sim
    monkeypatch.setattr(sim, "CHUNK", 700)
    c = build_chain([PartitionRates(1, 0.3, 0.05, 0.05)] * 2, 2.0, "combined")
    assert sim.simulate(c, 5.0, 5000, 3, workers=1) == sim.simulate(c, 5.0, 5000, 3, workers=4)


def test_trajectories_use_positive_rate_edges_only():
    c = build_chain([PartitionRates(1, 0.5, 0.1, 0.1)] * 3, 1.0, "combined")
    trace = []
    simulate(c, 20.0, 500, 11, trace=trace)
    moves = np.concatenate(trace, axis=1)
    assert moves.shape[1] > 1000
    R = c.rate_matrix.toarray()
    assert (R[moves[0], moves[1]] > 0).all()
    assert (moves[0] != moves[1]).all()  # self-loops are never sampled


def test_wilson_interval_edges():
    lo, hi = wilson_interval(1000, 1000)
    assert hi == pytest.approx(1.0, abs=1e-12) and 0.99 < lo < 1.0
    lo, hi = wilson_interval(0, 1000)
    assert lo == pytest.approx(0.0, abs=1e-12) and hi < 0.01


def test_rejects_zero_trials():
    with pytest.raises(ValueError):
        simulate(build_chain([PartitionRates(1, 1.0)], 1.0, "scu_only"), 1.0, 0, 0)


@pytest.mark.slow
def test_repeated_seed_coverage(fir64, library, calibrated_params):
    """Over 100 seeds the analytic value falls outside the 99% interval no more
    often than nominal coverage allows (binomial tail below 1e-3)."""
    c = design_chain(fir64, library, calibrated_params, "combined", 2, 3600.0)
    T = calibrated_params.mission_time
    r, a = engine.reliability(c, T), engine.availability(c, T)
    misses_r = misses_a = 0
    for seed in range(100):
        rel, av = simulate(c, T, 2000, seed)
        misses_r += not rel.covers(r)
        misses_a += not av.covers(a)
    limit = int(binom.isf(1e-3, 100, 0.01))
    print(f"coverage over 100 seeds: reliability {100 - misses_r}/100, availability {100 - misses_a}/100")
    assert misses_r <= limit and misses_a <= limit
