"""Partition chains, synchronization wiring, parallel composition and PRISM export."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import reduce
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .model import (
    DEGRADED, FAILED, LOCAL_STATES, OPERATIONAL, SCRUB, ComposedCtmc, CtmcModule,
    PartitionRates, Transition, _frozen,
)


class CompositionError(ValueError):
    pass


@dataclass(frozen=True)
class SyncSpec:
    """Which partition carries the scrub rate, and which pairs share DCU actions.

    For a pair (i, j) two labels exist: ``dcu_i_j`` where partition i carries
    the numeric rate and j carries 1, and ``dcu_j_i`` the other way round.
    """

    n_partitions: int
    scrub_master: int = 1
    cross_dcu_pairs: tuple[tuple[int, int], ...] = ()

    @classmethod
    def default(cls, n: int, cross_dcu: bool = False) -> "SyncSpec":
        pairs = tuple(combinations(range(1, n + 1), 2)) if cross_dcu else ()
        return cls(n, 1, pairs)

    @staticmethod
    def pair_labels(i: int, j: int) -> tuple[tuple[str, int], tuple[str, int]]:
        """``((label, rated partition), ...)`` for the pair."""
        return (f"dcu_{i}_{j}", i), (f"dcu_{j}_{i}", j)

    def violations(self) -> list[str]:
        out = []
        if not 1 <= self.scrub_master <= self.n_partitions:
            out.append(f"scrub master {self.scrub_master} out of range")
        seen = set()
        for i, j in self.cross_dcu_pairs:
            key = frozenset((i, j))
            if i == j or not (1 <= i <= self.n_partitions and 1 <= j <= self.n_partitions):
                out.append(f"bad pair ({i}, {j})")
            if key in seen:
                out.append(f"pair ({i}, {j}) listed twice")
            seen.add(key)
        return out


def _scrub_transitions(mu: float, scrub_master: bool) -> list[Transition]:
    rate, expr = (mu, "mu") if scrub_master else (1.0, "1")
    return [Transition(s, OPERATIONAL, SCRUB, rate, expr) for s in (OPERATIONAL, DEGRADED, FAILED)]


def _module(index, kind, transitions, actions, constants):
    kept = tuple(t for t in transitions if t.rate != 0.0)
    return CtmcModule(index, kind, kept, frozenset(actions), tuple(constants))


def build_scu_partition(rates: PartitionRates, mu: float, *, index: int = 1,
                        scrub_master: bool = True) -> CtmcModule:
    lam = rates.lambda_scu
    p = f"p{index}_"
    trs = [
        Transition(OPERATIONAL, DEGRADED, p + "scu1", 3 * lam, f"3*lambda_{index}"),
        Transition(DEGRADED, FAILED, p + "scu2", 2 * lam, f"2*lambda_{index}"),
        *_scrub_transitions(mu, scrub_master),
    ]
    consts = [(f"lambda_{index}", lam)]
    return _module(index, "scu", trs, {p + "scu1", p + "scu2", SCRUB}, consts)


def build_combined_partition(rates: PartitionRates, mu: float, *, index: int = 1,
                             scrub_master: bool = True) -> CtmcModule:
    lam, beta = rates.lambda_scu, rates.beta
    p = f"p{index}_"
    trs = [
        Transition(OPERATIONAL, DEGRADED, p + "scu1", 3 * lam, f"3*lambda_{index}"),
        Transition(DEGRADED, FAILED, p + "scu2", 2 * lam, f"2*lambda_{index}"),
        Transition(OPERATIONAL, FAILED, p + "dcu1", 3 * beta, f"3*beta_{index}"),
        Transition(DEGRADED, FAILED, p + "dcu2", 2 * beta, f"2*beta_{index}"),
        *_scrub_transitions(mu, scrub_master),
    ]
    consts = [(f"lambda_{index}", lam), (f"beta_{index}", beta)]
    actions = {p + "scu1", p + "scu2", p + "dcu1", p + "dcu2", SCRUB}
    return _module(index, "combined", trs, actions, consts)


def add_cross_dcu_actions(modules: Sequence[CtmcModule], rates: Sequence[PartitionRates],
                          sync: SyncSpec) -> list[CtmcModule]:
    """Attach the synchronized cross-partition DCU transitions.

    From local states (k_i, k_j) with k in {3, 2} the composed pair moves to
    (k_i - 1, k_j - 1) at rate k_i*beta1_i + k_j*beta1_j. A partner that has
    already failed takes no part.
    """
    if any(m.kind != "combined" for m in modules):
        raise CompositionError("cross-partition DCU rates require combined partition models")
    if len(modules) < 2 and sync.cross_dcu_pairs:
        raise CompositionError("cross-partition DCUs need at least two partitions")
    extra = {m.index: [] for m in modules}
    labels = {m.index: set() for m in modules}
    consts = {m.index: [] for m in modules}
    by_index = {m.index: r for m, r in zip(modules, rates)}
    for i, j in sync.cross_dcu_pairs:
        for label, rated in SyncSpec.pair_labels(i, j):
            partner = j if rated == i else i
            b1 = by_index[rated].beta1
            for k in (OPERATIONAL, DEGRADED):
                extra[rated].append(Transition(k, k - 1, label, k * b1, f"{k}*beta1_{rated}"))
                extra[partner].append(Transition(k, k - 1, label, 1.0, "1"))
            labels[rated].add(label)
            labels[partner].add(label)
        for idx in (i, j):
            name = f"beta1_{idx}"
            if all(c[0] != name for c in consts[idx]):
                consts[idx].append((name, by_index[idx].beta1))
    out = []
    for m in modules:
        trs = m.transitions + tuple(t for t in extra[m.index] if t.rate != 0.0)
        out.append(replace(m, transitions=trs, actions=m.actions | labels[m.index],
                           constants=m.constants + tuple(consts[m.index])))
    return out


def _check_sync(modules: Sequence[CtmcModule], sync: SyncSpec):
    problems = sync.violations()
    if len(modules) != sync.n_partitions:
        problems.append(f"{len(modules)} modules for {sync.n_partitions} partitions")
    for m in modules:
        if SCRUB not in m.actions:
            problems.append(f"{m.name} has no {SCRUB} action")
        elif m.index != sync.scrub_master:
            bad = [t for t in m.transitions if t.action == SCRUB and t.rate != 1.0]
            if bad:
                problems.append(f"{m.name} is not the scrub master but carries scrub rate {bad[0].rate}")
    owners: dict[str, list[int]] = {}
    for m in modules:
        for a in m.actions:
            owners.setdefault(a, []).append(m.index)
    for i, j in sync.cross_dcu_pairs:
        for label, _ in SyncSpec.pair_labels(i, j):
            if sorted(owners.get(label, [])) != sorted((i, j)):
                problems.append(f"action {label} must be shared by exactly P{i} and P{j}, "
                                f"found {owners.get(label, [])}")
    declared = {label for i, j in sync.cross_dcu_pairs for label, _ in SyncSpec.pair_labels(i, j)}
    for a, who in owners.items():
        if a.startswith("dcu_") and a not in declared:
            problems.append(f"action {a} is not declared in the sync spec")
        elif a.startswith("dcu_") and len(who) == 1:
            problems.append(f"synchronized action {a} in P{who[0]} has no counterpart")
    if problems:
        raise CompositionError("; ".join(problems))


def _kron_fold(acc, module):
    mats, n = acc
    other = module.action_matrices()
    eye_a, eye_b = sp.identity(n, format="csr"), sp.identity(3, format="csr")
    out = {}
    for a in sorted(set(mats) | set(other)):
        if a in mats and a in other:
            m = sp.kron(mats[a], other[a], format="csr")  # full synchronization
        elif a in mats:
            m = sp.kron(mats[a], eye_b, format="csr")
        else:
            m = sp.kron(eye_a, other[a], format="csr")
        m.eliminate_zeros()
        out[a] = m
    return out, n * 3


def compose(modules: Sequence[CtmcModule], sync: SyncSpec | None = None) -> ComposedCtmc:
    """Parallel composition: shared actions fire jointly at the product of the
    participating rates, all other actions interleave.

    The fold runs left to right, so state tuples are ordered lexicographically
    with the first partition most significant.
    """
    if not modules:
        raise CompositionError("nothing to compose")
    if sync is not None:
        _check_sync(modules, sync)
    first = modules[0].action_matrices()
    mats, n = reduce(_kron_fold, modules[1:], (first, 3))
    states = tuple(_tuples(len(modules)))
    return ComposedCtmc(states, mats, None, (OPERATIONAL,) * len(modules))


def _tuples(n):
    arr = np.array(np.meshgrid(*[LOCAL_STATES] * n, indexing="ij")).reshape(n, -1).T
    return map(tuple, arr.tolist())


def label_states(c: ComposedCtmc) -> ComposedCtmc:
    """Attach up/down/operational/degraded/failed labels.

    A state is up when no partition has failed; operational is the single
    state with every partition at 3.
    """
    arr = np.array(c.states, dtype=int)
    up = (arr >= DEGRADED).all(axis=1)
    oper = (arr == OPERATIONAL).all(axis=1)
    labels = {
        "up": _frozen(up),
        "down": _frozen(~up),
        "operational": _frozen(oper),
        "degraded": _frozen(up & ~oper),
        "failed": _frozen(~up),
    }
    return replace(c, labels=labels)


def build_system(rates: Sequence[PartitionRates], mu: float, model_kind: str) -> tuple[list[CtmcModule], SyncSpec]:
    """Partition modules and their sync spec for one design point."""
    n = len(rates)
    if model_kind == "scu_only":
        mods = [build_scu_partition(r, mu, index=i, scrub_master=(i == 1))
                for i, r in enumerate(rates, start=1)]
        sync = SyncSpec.default(n, cross_dcu=False)
    elif model_kind == "combined":
        mods = [build_combined_partition(r, mu, index=i, scrub_master=(i == 1))
                for i, r in enumerate(rates, start=1)]
        sync = SyncSpec.default(n, cross_dcu=n > 1)
        if n > 1:
            mods = add_cross_dcu_actions(mods, rates, sync)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    return mods, sync


def build_chain(rates: Sequence[PartitionRates], mu: float, model_kind: str) -> ComposedCtmc:
    mods, sync = build_system(rates, mu, model_kind)
    return label_states(compose(mods, sync))


# --- PRISM export -------------------------------------------------------------

def _num(x: float) -> str:
    return repr(float(x))


def _guard(var: str, source: int) -> str:
    return f"{var}={source}"


def export_prism(modules: Sequence[CtmcModule], sync: SyncSpec, labels: bool = True,
                 mu: float | None = None) -> str:
    """Render the partition modules as a PRISM CTMC model."""
    _check_sync(modules, sync)
    lines = ["// partitioned TMR with blind scrubbing", "ctmc", ""]
    if mu is None:
        master = next(m for m in modules if m.index == sync.scrub_master)
        mu = next((t.rate for t in master.transitions if t.action == SCRUB), 0.0)
    lines.append(f"const double mu = {_num(mu)};")
    for m in modules:
        for name, value in m.constants:
            lines.append(f"const double {name} = {_num(value)};")
    lines.append("")
    for m in modules:
        var = f"s{m.index}"
        lines.append(f"module {m.name}")
        lines.append(f"  {var} : [1..3] init {m.initial};")
        for action in sorted(m.actions):
            trs = sorted((t for t in m.transitions if t.action == action),
                         key=lambda t: (-t.source, -t.target))
            if not trs:
                # keeps the label in the alphabet so partners stay blocked
                lines.append(f"  [{action}] false -> 1 : true;")
            for t in trs:
                rate = t.expr if t.expr is not None else _num(t.rate)
                lines.append(f"  [{action}] {_guard(var, t.source)} -> {rate} : ({var}'={t.target});")
        lines.append("endmodule")
        lines.append("")
    if labels:
        vars_ = [f"s{m.index}" for m in modules]
        up = " & ".join(f"{v}>=2" for v in vars_)
        oper = " & ".join(f"{v}=3" for v in vars_)
        lines.append(f'label "up" = {up};')
        lines.append(f'label "operational" = {oper};')
        lines.append(f'label "oper" = {oper};')
        lines.append("")
        lines.append('rewards "up_time"')
        lines.append(f"  {up} : 1;")
        lines.append("endrewards")
        lines.append("")
    return "\n".join(lines)
