"""Input parsing and failure-rate arithmetic."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import yaml

from .model import (
    HOUR, MONTH, ComponentLibrary, Dfg, Node, PartitionPlan, PartitionRates,
    RateParams, validate,
)

MODEL_KINDS = ("scu_only", "combined")
OUTPUTS = ("reliability", "availability", "steady_state", "correctness")

_TIME_UNITS = {
    "s": 1.0, "sec": 1.0, "second": 1.0, "seconds": 1.0,
    "min": 60.0, "minute": 60.0, "minutes": 60.0, "m": 60.0,
    "h": HOUR, "hr": HOUR, "hour": HOUR, "hours": HOUR,
    "d": 24 * HOUR, "day": 24 * HOUR, "days": 24 * HOUR,
    "month": MONTH, "months": MONTH,
}
_QUANTITY = re.compile(r"^\s*([0-9.]+(?:[eE][-+]?[0-9]+)?)\s*([a-zA-Z]*)\s*$")


class IngestError(ValueError):
    """Bad input file or configuration."""


class DfgSyntaxError(IngestError):
    def __init__(self, message, line=None, column=None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class UnknownKindError(IngestError):
    pass


class CycleError(IngestError):
    pass


def parse_duration(value) -> float:
    """Seconds from a number (already seconds) or a string like ``"15min"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    m = _QUANTITY.match(str(value))
    if not m:
        raise IngestError(f"cannot parse duration {value!r}")
    number, unit = m.groups()
    unit = unit or "s"
    if unit not in _TIME_UNITS:
        raise IngestError(f"unknown time unit {unit!r} in {value!r}")
    return float(number) * _TIME_UNITS[unit]


def parse_rate(value) -> float:
    """Rate per second from a number (already per second) or e.g. ``"5e-3/h"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip()
    if "/" not in text:
        return float(text)
    number, unit = text.split("/", 1)
    return float(number) / parse_duration(f"1{unit.strip()}")


def format_duration(seconds: float) -> str:
    for unit, scale in (("h", HOUR), ("min", 60.0)):
        if seconds >= scale and (seconds / scale).is_integer():
            return f"{int(seconds / scale)}{unit}"
    if float(seconds).is_integer():
        return f"{int(seconds)}s"
    return f"{float(seconds)!r}s"


# --- DFG and library files ---------------------------------------------------

def parse_dfg(text: str, library: ComponentLibrary | None = None) -> Dfg:
    """Parse a JSON DFG with ``nodes`` ([{id, kind}]) and ``edges`` ([[from, to]])."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DfgSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise DfgSyntaxError("DFG must be an object with a 'nodes' array")
    try:
        nodes = tuple(Node(str(n["id"]), str(n["kind"])) for n in doc["nodes"])
        edges = tuple((str(a), str(b)) for a, b in doc.get("edges", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise DfgSyntaxError(f"malformed node or edge entry: {exc}") from None
    if not nodes:
        raise IngestError("empty DFG")
    dfg = Dfg(nodes, edges)
    problems = validate(dfg, library=library)
    for v in problems:
        if v.invariant == "acyclic":
            raise CycleError(f"cyclic graph: {v.message}")
    for v in problems:
        if v.invariant == "library-coverage":
            raise UnknownKindError(v.message)
    if problems:
        raise IngestError("; ".join(str(v) for v in problems))
    return dfg


def dump_dfg(dfg: Dfg) -> str:
    doc = {"nodes": [{"id": n.id, "kind": n.kind} for n in dfg.nodes],
           "edges": [list(e) for e in dfg.edges]}
    return json.dumps(doc, indent=1) + "\n"


def parse_library(text: str) -> ComponentLibrary:
    """Parse ``kind,critical_bits`` CSV (header required, '#' lines ignored)."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0][:2]] != ["kind", "critical_bits"]:
        raise IngestError("library must start with header 'kind,critical_bits'")
    entries = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise IngestError(f"library row {lineno}: expected two columns")
        kind, bits = row[0].strip(), row[1].strip()
        try:
            count = int(bits)
        except ValueError:
            raise IngestError(f"library row {lineno}: bad bit count {bits!r}") from None
        if count < 0:
            raise IngestError(f"library row {lineno}: negative bit count")
        entries[kind] = count
    return ComponentLibrary(entries)


def fir_dfg(taps: int) -> Dfg:
    """Fully parallel FIR: one multiplier per tap feeding a balanced adder tree.

    Nodes are listed in post-order of the tree, so contiguous blocks of the
    topological order keep neighbouring taps together.
    """
    if taps < 1:
        raise ValueError("taps must be >= 1")
    nodes, edges = [], []
    counter = iter(range(taps))

    def build(lo, hi):
        if hi - lo == 1:
            nid = f"m{lo}"
            nodes.append(Node(nid, "multiplier"))
            return nid
        mid = (lo + hi + 1) // 2
        left, right = build(lo, mid), build(mid, hi)
        nid = f"a{next(counter)}"
        nodes.append(Node(nid, "adder"))
        edges.extend([(left, nid), (right, nid)])
        return nid

    build(0, taps)
    return Dfg(tuple(nodes), tuple(edges))


# --- rates -------------------------------------------------------------------

def module_rate(lib: ComponentLibrary, kind: str, lambda_bit: float) -> float:
    return lambda_bit * lib.critical_bits(kind)


def domain_rate(module_rates: Sequence[float], lambda_voter: float, partition_index: int) -> float:
    """Sum of module rates plus the input voter (absent in the first partition)."""
    return float(sum(module_rates)) + (0.0 if partition_index == 1 else lambda_voter)


def split_rates(lambda_domain: float, params: RateParams, voter_included: bool = False) -> PartitionRates:
    """Divide a domain rate into SCU and DCU parts.

    Without explicit gammas both DCU rates default to ``alpha_dcu * lambda_domain``.
    """
    lam = params.alpha_scu * lambda_domain
    if params.gamma_same is not None:
        beta = 2.0 * params.gamma_same
    else:
        beta = params.alpha_dcu * lambda_domain
    if params.gamma_cross is not None:
        beta1 = 3.0 * params.gamma_cross
    else:
        beta1 = params.alpha_dcu * lambda_domain
    return PartitionRates(lambda_domain, lam, beta, beta1, voter_included)


def plan_partitions(dfg: Dfg, n: int, include_terminal_voter_partition: bool = False) -> PartitionPlan:
    """Split the topological order into ``n`` contiguous, near-equal blocks."""
    order = dfg.topological_order()
    if not 1 <= n <= len(order):
        raise IngestError(f"partition count {n} out of range 1..{len(order)}")
    q, r = divmod(len(order), n)
    cuts, start = [], 0
    for i in range(n):
        size = q + (1 if i < r else 0)
        cuts.append(tuple(order[start:start + size]))
        start += size
    return PartitionPlan(tuple(cuts), include_terminal_voter_partition)


def partition_rates(dfg: Dfg, lib: ComponentLibrary, plan: PartitionPlan,
                    params: RateParams) -> list[PartitionRates]:
    """Per-partition rates for a plan, including the terminal voter partition if enabled."""
    groups = [list(g) for g in plan.cuts]
    if plan.include_terminal_voter_partition:
        groups.append([])
    out = []
    for i, group in enumerate(groups, start=1):
        rates = [module_rate(lib, dfg.kind_of(nid), params.lambda_bit) for nid in group]
        lam = domain_rate(rates, params.lambda_voter, i)
        out.append(split_rates(lam, params, voter_included=(i > 1 and params.lambda_voter > 0)))
    return out


# --- analysis configuration -----------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    """Scale lambda_bit so a reference design point hits a target reliability."""

    target_reliability: float = 0.65
    scrub_interval: float = 15 * 60.0
    partitions: int = 1
    model_kind: str = "scu_only"


@dataclass(frozen=True)
class AnalysisConfig:
    model_kinds: tuple[str, ...] = ("scu_only",)
    partitions: tuple[int, ...] = (1,)
    cuts: tuple[tuple[str, ...], ...] | None = None
    scrub_intervals: tuple[float, ...] = (15 * 60.0,)
    params: RateParams = field(default_factory=RateParams)
    include_terminal_voter_partition: bool = False
    outputs: tuple[str, ...] = ("reliability", "availability", "steady_state")
    reliability_label: str = "up"
    eps: float = 1e-10
    simulate_trials: int = 0
    seed: int = 20240601
    calibration: Calibration | None = None

    def violations(self) -> list[str]:
        out = []
        if not self.scrub_intervals:
            out.append("at least one scrub interval is required")
        if any(t <= 0 for t in self.scrub_intervals):
            out.append("scrub intervals must be positive")
        if self.cuts is None and (not self.partitions or min(self.partitions) < 1):
            out.append("partition counts must be >= 1")
        for k in self.model_kinds:
            if k not in MODEL_KINDS:
                out.append(f"model_kind {k!r} not in {MODEL_KINDS}")
        if not self.model_kinds:
            out.append("at least one model_kind is required")
        for o in self.outputs:
            if o not in OUTPUTS:
                out.append(f"unknown output {o!r}")
        if self.reliability_label not in ("up", "operational"):
            out.append("reliability_label must be 'up' or 'operational'")
        out.extend(str(v) for v in validate(self.params))
        return out


def _as_tuple(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


_MODEL_ALIASES = {"scu": "scu_only", "scu_only": "scu_only", "combined": "combined"}


def config_from_mapping(doc: Mapping[str, Any]) -> AnalysisConfig:
    """Build an AnalysisConfig from a parsed YAML/JSON mapping."""
    doc = dict(doc or {})
    known = {
        "model_kind", "model_kinds", "partitions", "scrub_intervals", "lambda_bit",
        "alpha_scu", "alpha_dcu", "lambda_voter", "gamma_same", "gamma_cross",
        "mission_time", "include_terminal_voter_partition", "outputs",
        "reliability_label", "eps", "simulate", "seed", "calibrate",
    }
    unknown = set(doc) - known
    if unknown:
        raise IngestError(f"unknown config keys: {sorted(unknown)}")
    try:
        kinds = _as_tuple(doc.get("model_kinds", doc.get("model_kind", "scu_only")))
        kinds = tuple(_MODEL_ALIASES.get(str(k), str(k)) for k in kinds)
        parts = doc.get("partitions", 1)
        cuts = None
        if isinstance(parts, Mapping):
            cuts = tuple(tuple(str(x) for x in g) for g in parts["cuts"])
            counts = (len(cuts),)
        else:
            counts = tuple(int(p) for p in _as_tuple(parts))
        alpha_dcu = float(doc.get("alpha_dcu", 0.0))
        alpha_scu = float(doc.get("alpha_scu", 1.0 - alpha_dcu))
        gs, gc = doc.get("gamma_same"), doc.get("gamma_cross")
        params = RateParams(
            lambda_bit=parse_rate(doc.get("lambda_bit", RateParams.lambda_bit)),
            mu=0.0,
            alpha_scu=alpha_scu,
            alpha_dcu=alpha_dcu,
            lambda_voter=parse_rate(doc.get("lambda_voter", 0.0)),
            gamma_same=None if gs is None else parse_rate(gs),
            gamma_cross=None if gc is None else parse_rate(gc),
            mission_time=parse_duration(doc.get("mission_time", MONTH)),
        )
        sim = doc.get("simulate") or {}
        calib = doc.get("calibrate")
        calibration = None
        if calib:
            calib = {} if calib is True else dict(calib)
            calibration = Calibration(
                target_reliability=float(calib.get("target_reliability", 0.65)),
                scrub_interval=parse_duration(calib.get("scrub_interval", "15min")),
                partitions=int(calib.get("partitions", 1)),
                model_kind=_MODEL_ALIASES.get(calib.get("model_kind", "scu_only"), "?"),
            )
        cfg = AnalysisConfig(
            model_kinds=kinds,
            partitions=counts,
            cuts=cuts,
            scrub_intervals=tuple(parse_duration(t) for t in _as_tuple(doc.get("scrub_intervals"))),
            params=params,
            include_terminal_voter_partition=bool(doc.get("include_terminal_voter_partition", False)),
            outputs=tuple(str(o) for o in _as_tuple(doc.get("outputs", AnalysisConfig.outputs))),
            reliability_label=str(doc.get("reliability_label", "up")),
            eps=float(doc.get("eps", 1e-10)),
            simulate_trials=int(sim.get("trials", 0)),
            seed=int(doc.get("seed", sim.get("seed", AnalysisConfig.seed))),
            calibration=calibration,
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, IngestError):
            raise
        raise IngestError(f"bad config value: {exc}") from None
    problems = cfg.violations()
    if problems:
        raise IngestError("; ".join(problems))
    return cfg


def parse_config(text: str) -> AnalysisConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise IngestError(f"config syntax error: {exc}") from None
    if doc is not None and not isinstance(doc, Mapping):
        raise IngestError("config must be a mapping")
    return config_from_mapping(doc or {})


def with_scrub(params: RateParams, tau: float) -> RateParams:
    return replace(params, mu=1.0 / tau)
