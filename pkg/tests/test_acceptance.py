"""Acceptance criteria. Each test prints one PASS/FAIL line, repeated in the
terminal summary under "acceptance criteria"."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, CONFIG_DIR
from oracles import STEADY_LAMBDA1_MU10, random_chain, rk4_transient, unrepaired_tmr
from tmrmodel import engine
from tmrmodel.builder import build_chain
from tmrmodel.ingest import parse_config
from tmrmodel.model import SCRUB, ComposedCtmc, PartitionRates, RateParams
from tmrmodel.simulator import simulate
from tmrmodel.sweep import design_chain, emit_csv, run_sweep

FIFTEEN_MIN, ONE_HOUR = 900.0, 3600.0
KINDS = ("scu_only", "combined")


def report(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def table(rows):
    return {(r.model_kind, r.partitions, r.scrub_interval): r for r in rows}


def test_1_state_counts(fir64, library, calibrated_params):
    problems, timings = [], []
    for kind in KINDS:
        for n, expected in ((1, 3), (2, 9), (4, 81), (8, 6561)):
            t0 = time.perf_counter()
            c = design_chain(fir64, library, calibrated_params, kind, n, FIFTEEN_MIN)
            dt = time.perf_counter() - t0
            limit = 1.0 if n <= 4 else 30.0
            timings.append(f"{kind}/N={n} {dt:.2f}s")
            if c.n_states != expected:
                problems.append(f"{kind}/N={n}: {c.n_states} states")
            if dt >= limit:
                problems.append(f"{kind}/N={n}: {dt:.2f}s >= {limit}s")
    report(1, "state counts 3/9/81/6561", not problems, "; ".join(problems) or ", ".join(timings))


def test_2_closed_form():
    t0 = time.perf_counter()
    worst = 0.0
    for lam in np.geomspace(1e-6, 1e-1, 5):
        for T in (1.0, 10.0, 100.0, 1000.0):
            c = build_chain([PartitionRates(lam, lam)], 0.0, "scu_only")
            worst = max(worst, abs(engine.reliability(c, T) - unrepaired_tmr(lam, T)))
    dt = time.perf_counter() - t0
    report(2, "closed-form unrepaired TMR at 20 points", worst <= 1e-9 and dt < 1.0,
           f"max error {worst:.2e} in {dt:.2f}s")


def test_3_balance_equations():
    t0 = time.perf_counter()
    c = build_chain([PartitionRates(1.0, 1.0)], 10.0, "scu_only")
    pi = engine.steady_state(c)
    got = np.array([pi[c.index((s,))] for s in (3, 2, 1)])
    err = np.abs(got - STEADY_LAMBDA1_MU10).max()
    dt = time.perf_counter() - t0
    report(3, "steady state (10/13, 2.5/13, 0.5/13)", err <= 1e-10 and dt < 1.0,
           f"max error {err:.2e} in {dt:.3f}s")


def test_4_ode_cross_check():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        c = random_chain(rng)
        p0 = rng.dirichlet(np.ones(c.n_states))
        t = float(rng.uniform(0.05, 1.0))
        ours = engine.transient(c, t, p0, eps=1e-12).distribution
        worst = max(worst, np.abs(ours - rk4_transient(c.rate_matrix.toarray(), p0, t)).max())
    dt = time.perf_counter() - t0
    report(4, "uniformization vs RK4 on 50 random chains", worst <= 1e-6 and dt < 60.0,
           f"max error {worst:.2e} in {dt:.1f}s")


def test_5_monte_carlo(fir64, library, calibrated_params):
    c = design_chain(fir64, library, calibrated_params, "combined", 2, ONE_HOUR)
    T = calibrated_params.mission_time
    t0 = time.perf_counter()
    rel, av = simulate(c, T, 100_000, seed=20240601)
    dt = time.perf_counter() - t0
    r, a = engine.reliability(c, T), engine.availability(c, T)
    ok = rel.covers(r) and av.covers(a) and dt < 120.0
    report(5, "Monte Carlo agreement, combined N=2 tau=1h", ok,
           f"reliability {r:.6f} in [{rel.lower:.6f}, {rel.upper:.6f}], "
           f"availability {a:.7f} in [{av.lower:.7f}, {av.upper:.7f}], {dt:.1f}s")


def test_6_qualitative_figures(fir64, library, calibrated_params, voter_free_rows):
    problems = []
    ref = design_chain(fir64, library, calibrated_params, "scu_only", 1, FIFTEEN_MIN)
    r1 = engine.reliability(ref, calibrated_params.mission_time)
    if abs(r1 - 0.65) > 0.005:
        problems.append(f"calibrated reliability {r1:.4f}")
    rows = table(voter_free_rows)
    taus = sorted({t for _, _, t in rows})
    for kind in KINDS:
        for tau in taus:
            seq = [rows[kind, n, tau].reliability for n in (1, 2, 4, 8)]
            if not all(b > a for a, b in zip(seq, seq[1:])):
                problems.append(f"{kind} tau={tau:g}s not strictly increasing: {seq}")
    avail = rows["scu_only", 1, FIFTEEN_MIN].availability
    if avail < 0.999 or abs(avail - 0.9999) > 0.05:
        problems.append(f"N=1 availability {avail:.6f}")
    got = {n: rows["scu_only", n, FIFTEEN_MIN].reliability for n in (1, 2, 4, 8)}
    for n, reference in ((1, 0.65), (2, 0.81), (4, 0.90), (8, 0.94)):
        if abs(got[n] - reference) > 0.05:
            problems.append(f"N={n} reliability {got[n]:.3f} vs {reference}")
    detail = (f"lambda_bit={calibrated_params.lambda_bit:.4e}/s, reliability at 15min "
              + "/".join(f"{got[n]:.3f}" for n in (1, 2, 4, 8)) + f", N=1 availability {avail:.5f}")
    report(6, "calibrated qualitative reproduction", not problems, "; ".join(problems) or detail)


def test_7_voter_trend_reversal(fir64, library):
    config = parse_config((CONFIG_DIR / "voter_study.yaml").read_text())
    rows = table(run_sweep(config, fir64, library, jobs=4))
    problems, seen = [], []
    for tau in (FIFTEEN_MIN, 1800.0, ONE_HOUR):
        for kind, want in (("scu_only", 4), ("combined", 2)):
            rel = {n: rows[kind, n, tau].reliability for n in (2, 4, 8)}
            best = max(rel, key=rel.get)
            seen.append(f"{kind}@{tau / 60:g}min best N={best}")
            if best != want:
                problems.append(f"{kind} tau={tau / 60:g}min best N={best} (want {want}): "
                                + ", ".join(f"N={n} {v:.4f}" for n, v in rel.items()))
    report(7, "voter-failure trend reversal", not problems, "; ".join(problems) or ", ".join(seen))


def test_8_correctness_property(fir64, library, calibrated_params):
    problems = []
    for kind in KINDS:
        for n in (1, 2, 4, 8):
            for tau in (FIFTEEN_MIN, ONE_HOUR, 4 * ONE_HOUR):
                c = design_chain(fir64, library, calibrated_params, kind, n, tau)
                if not engine.check_scrub_recoverability(c):
                    problems.append(f"{kind}/N={n}/tau={tau:g}s false")
                if n <= 4 and tau == FIFTEEN_MIN:
                    cut = c.rate_matrix - c.action_rates[SCRUB]
                    bare = ComposedCtmc.from_rate_matrix(cut, labels=c.labels, initial=c.initial_index)
                    if engine.check_scrub_recoverability(bare):
                        problems.append(f"{kind}/N={n} still true without scrub edges")
    report(8, "scrub recoverability", not problems,
           "; ".join(problems) or "true for 24 models, false for 6 with scrub edges removed")


def test_9_reduction_identity(fir64, library, calibrated_params):
    params = RateParams(lambda_bit=calibrated_params.lambda_bit, alpha_scu=1.0, alpha_dcu=0.0,
                        lambda_voter=0.0)
    problems = []
    for n in (1, 2, 4):
        a = design_chain(fir64, library, params, "combined", n, FIFTEEN_MIN).rate_matrix
        b = design_chain(fir64, library, params, "scu_only", n, FIFTEEN_MIN).rate_matrix
        if a.shape != b.shape or (a != b).nnz:
            problems.append(f"N={n} differs")
    report(9, "combined with beta=beta1=0 equals SCU", not problems,
           "; ".join(problems) or "identical rate matrices for N=1,2,4")


def test_10_determinism(voter_free_config, fir64, library, voter_free_rows):
    first = emit_csv(voter_free_rows)
    second = emit_csv(run_sweep(voter_free_config, fir64, library, jobs=2))
    report(10, "byte-identical sweep CSV", first == second,
           f"{len(first.encode())} bytes, {len(voter_free_rows)} rows")
