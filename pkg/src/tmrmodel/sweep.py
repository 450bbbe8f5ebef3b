"""Design-point evaluation, partition x scrub-interval sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import math
from decimal import Decimal
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import engine
from .builder import build_chain
from .ingest import AnalysisConfig, IngestError, partition_rates, plan_partitions
from .model import ComponentLibrary, ComposedCtmc, Dfg, PartitionPlan, RateParams
from .simulator import simulate


class DesignPointError(RuntimeError):
    def __init__(self, point, cause):
        super().__init__(f"{point}: {cause}")
        self.point = point
        self.cause = cause


@dataclass(frozen=True)
class SweepRow:
    model_kind: str
    partitions: int
    scrub_interval: float
    mission_time: float
    reliability: float
    availability: float
    steady_state_up: float
    states: int
    transitions: int
    source: str = "analytic"


@dataclass(frozen=True)
class DesignPoint:
    model_kind: str
    partitions: int
    scrub_interval: float

    def __str__(self):
        return f"{self.model_kind}/N={self.partitions}/tau={self.scrub_interval:g}s"


def effective_params(params: RateParams, model_kind: str, tau: float) -> RateParams:
    """Rate parameters as used at one design point.

    The SCU-only model treats every upset as a single-cell upset.
    """
    p = replace(params, mu=1.0 / tau)
    if model_kind == "scu_only":
        p = replace(p, alpha_scu=1.0, alpha_dcu=0.0)
    return p


def design_chain(dfg: Dfg, library: ComponentLibrary, params: RateParams, model_kind: str,
                 n: int, tau: float, *, terminal_voter: bool = False,
                 cuts: Sequence[Sequence[str]] | None = None) -> ComposedCtmc:
    p = effective_params(params, model_kind, tau)
    if cuts is not None:
        plan = PartitionPlan(tuple(tuple(g) for g in cuts), terminal_voter)
    else:
        plan = plan_partitions(dfg, n, terminal_voter)
    rates = partition_rates(dfg, library, plan, p)
    return build_chain(rates, p.mu, model_kind)


def evaluate(chain: ComposedCtmc, point: DesignPoint, T: float, outputs=("reliability", "availability", "steady_state"),
             eps: float = 1e-10, reliability_label: str = "up") -> SweepRow:
    nan = float("nan")
    rel = engine.reliability(chain, T, eps, reliability_label) if "reliability" in outputs else nan
    av = engine.availability(chain, T, eps) if "availability" in outputs else nan
    ss = nan
    if "steady_state" in outputs:
        pi = engine.steady_state(chain)
        ss = float(np.clip(pi[chain.label("up")].sum(), 0.0, 1.0))
    return SweepRow(point.model_kind, point.partitions, point.scrub_interval, T, rel, av, ss,
                    chain.n_states, chain.n_transitions)


def calibrate_lambda_bit(dfg: Dfg, library: ComponentLibrary, params: RateParams, *,
                         target: float = 0.65, tau: float = 900.0, partitions: int = 1,
                         model_kind: str = "scu_only", eps: float = 1e-10,
                         label: str = "up") -> float:
    """lambda_bit for which the reference design point has reliability ``target``."""
    T = params.mission_time

    def gap(log_lb):
        p = replace(params, lambda_bit=math.exp(log_lb))
        chain = design_chain(dfg, library, p, model_kind, partitions, tau)
        return engine.reliability(chain, T, eps, label) - target

    lo, hi = math.log(1e-16), math.log(1e-6)
    if gap(lo) * gap(hi) > 0:
        raise engine.NumericalError(f"target reliability {target} not bracketed")
    return math.exp(brentq(gap, lo, hi, xtol=1e-12, rtol=1e-12))


def _grid(config: AnalysisConfig) -> list[DesignPoint]:
    return [DesignPoint(k, n, tau) for k in config.model_kinds for n in config.partitions
            for tau in config.scrub_intervals]


def _run_point(args):
    point, config, dfg, library = args
    try:
        chain = design_chain(dfg, library, config.params, point.model_kind, point.partitions,
                             point.scrub_interval,
                             terminal_voter=config.include_terminal_voter_partition,
                             cuts=config.cuts)
        T = config.params.mission_time
        rows = [evaluate(chain, point, T, config.outputs, config.eps, config.reliability_label)]
        if "correctness" in config.outputs and not engine.check_scrub_recoverability(chain):
            raise engine.NumericalError("scrub-recoverability property violated")
        if config.simulate_trials:
            rel, av = simulate(chain, T, config.simulate_trials, config.seed,
                               label=config.reliability_label)
            rows.append(SweepRow(point.model_kind, point.partitions, point.scrub_interval, T,
                                 rel.estimate, av.estimate, float("nan"), chain.n_states,
                                 chain.n_transitions, "simulated"))
        return rows
    except (IngestError, engine.NumericalError, ValueError) as exc:
        raise DesignPointError(point, exc) from exc


def calibrated(config: AnalysisConfig, dfg: Dfg, library: ComponentLibrary) -> AnalysisConfig:
    """Apply the config's calibration block, if any, to lambda_bit."""
    cal = config.calibration
    if cal is None:
        return config
    lb = calibrate_lambda_bit(dfg, library, replace(config.params, lambda_voter=0.0),
                              target=cal.target_reliability, tau=cal.scrub_interval,
                              partitions=cal.partitions, model_kind=cal.model_kind,
                              eps=config.eps)
    return replace(config, params=replace(config.params, lambda_bit=lb), calibration=None)


def run_sweep(config: AnalysisConfig, dfg: Dfg, library: ComponentLibrary,
              jobs: int = 1) -> list[SweepRow]:
    """Evaluate every (model kind, N, scrub interval) point, in grid order."""
    problems = config.violations()
    if problems:
        raise IngestError("; ".join(problems))
    config = calibrated(config, dfg, library)
    tasks = [(p, config, dfg, library) for p in _grid(config)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_point, tasks))
    else:
        chunks = [_run_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


# --- CSV ---------------------------------------------------------------------

CSV_COLUMNS = [f.name for f in fields(SweepRow)]
_TIME_COLUMNS = {"scrub_interval", "mission_time"}  # seconds


def _fmt(value, column: str = "") -> str:
    if column in _TIME_COLUMNS:
        return np.format_float_positional(float(value), precision=12, fractional=False, trim="-")
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    value = float(value)
    if not math.isfinite(value):
        return repr(value)
    return format(Decimal(f"{value:.11e}"), "f")


def emit_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v, c) for c, v in zip(CSV_COLUMNS, astuple(row))])
    return buf.getvalue()
