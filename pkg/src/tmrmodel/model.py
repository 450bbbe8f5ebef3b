"""
Shared domain types for partitioned-TMR dependability models.

Local partition states are numbered the classic way: 3 (all three domains
operational), 2 (one domain faulty, output still masked) and 1 (two or more
domains faulty). Global states are tuples of local states in partition order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Mapping, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp

OPERATIONAL, DEGRADED, FAILED = 3, 2, 1
LOCAL_STATES = (FAILED, DEGRADED, OPERATIONAL)  # index = state - 1
LOCAL_LABELS = {OPERATIONAL: "operational", DEGRADED: "degraded", FAILED: "failed"}
STATE_LABELS = ("up", "down", "operational", "degraded", "failed")

SCRUB = "perform_scrub"
HOUR = 3600.0
MONTH = 730 * HOUR


@dataclass(frozen=True)
class Violation:
    invariant: str
    element: str
    message: str

    def __str__(self):
        return f"{self.invariant}: {self.message} ({self.element})"


@dataclass(frozen=True)
class Node:
    id: str
    kind: str


@dataclass(frozen=True)
class Dfg:
    """Data flow graph: operation nodes plus (producer, consumer) edges."""

    nodes: tuple[Node, ...]
    edges: tuple[tuple[str, str], ...] = ()

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def kind_of(self, node_id: str) -> str:
        for n in self.nodes:
            if n.id == node_id:
                return n.kind
        raise KeyError(node_id)

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.node_ids)
        g.add_edges_from(self.edges)
        return g

    def topological_order(self) -> list[str]:
        """Topological order, ties broken by position in the node list."""
        position = {nid: i for i, nid in enumerate(self.node_ids)}
        return list(nx.lexicographical_topological_sort(self.graph(), key=position.__getitem__))


@dataclass(frozen=True)
class ComponentLibrary:
    """Critical-bit counts per component kind."""

    entries: Mapping[str, int]

    def critical_bits(self, kind: str) -> int:
        try:
            return self.entries[kind]
        except KeyError:
            raise KeyError(f"component kind {kind!r} missing from library") from None

    def __contains__(self, kind):
        return kind in self.entries


@dataclass(frozen=True)
class PartitionPlan:
    cuts: tuple[tuple[str, ...], ...]
    include_terminal_voter_partition: bool = False

    @property
    def n_partitions(self) -> int:
        """Partition count including the terminal voter partition if enabled."""
        return len(self.cuts) + int(self.include_terminal_voter_partition)


@dataclass(frozen=True)
class RateParams:
    """Stochastic parameters; every rate is per second.

    ``mu`` is the scrub rate (1/tau); zero disables scrubbing. ``gamma_same``
    and ``gamma_cross`` are optional per-ordered-pair DCU rates.
    """

    lambda_bit: float = 7.31e-12
    mu: float = 1.0 / (15 * 60)
    alpha_scu: float = 1.0
    alpha_dcu: float = 0.0
    lambda_voter: float = 0.0
    gamma_same: float | None = None
    gamma_cross: float | None = None
    mission_time: float = MONTH


@dataclass(frozen=True)
class PartitionRates:
    lambda_domain: float
    lambda_scu: float
    beta: float = 0.0
    beta1: float = 0.0
    voter_included: bool = False


@dataclass(frozen=True)
class Transition:
    source: int
    target: int
    action: str
    rate: float
    expr: str | None = None  # symbolic rate for model export


@dataclass(frozen=True)
class CtmcModule:
    """One partition's three-state chain.

    ``actions`` is the full alphabet, which may contain labels with no
    transitions left (e.g. a zero scrub rate); such labels still block
    synchronization partners.
    """

    index: int
    kind: str  # "scu" or "combined"
    transitions: tuple[Transition, ...]
    actions: frozenset[str]
    constants: tuple[tuple[str, float], ...] = ()
    initial: int = OPERATIONAL
    states: tuple[int, ...] = (OPERATIONAL, DEGRADED, FAILED)

    @property
    def name(self) -> str:
        return f"P{self.index}"

    def action_matrices(self) -> dict[str, sp.csr_matrix]:
        mats = {a: np.zeros((3, 3)) for a in sorted(self.actions)}
        for tr in self.transitions:
            mats[tr.action][tr.source - 1, tr.target - 1] += tr.rate
        return {a: sp.csr_matrix(m) for a, m in mats.items()}

    def rate_matrix(self) -> np.ndarray:
        r = np.zeros((3, 3))
        for tr in self.transitions:
            r[tr.source - 1, tr.target - 1] += tr.rate
        return r


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ComposedCtmc:
    """Global chain over partition-state tuples.

    States are ordered lexicographically over tuples of local states with
    local order 1 < 2 < 3, so for two partitions (3, 3) has index 8.
    ``action_rates`` keeps per-action provenance; the rate matrix is their sum.
    """

    states: tuple[tuple[int, ...], ...]
    action_rates: Mapping[str, sp.csr_matrix]
    labels: Mapping[str, np.ndarray] | None = None
    initial_state: tuple[int, ...] | None = None
    generic: bool = False  # True when wrapping an arbitrary rate matrix
    _R: sp.csr_matrix | None = field(default=None, repr=False, compare=False)
    _index: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})
        if self._R is None:
            n = len(self.states)
            r = sp.csr_matrix((n, n))
            for m in self.action_rates.values():
                r = r + m
            r.eliminate_zeros()
            r.sort_indices()
            object.__setattr__(self, "_R", r.tocsr())
        if self.initial_state is None and self.states:
            object.__setattr__(self, "initial_state", self.states[-1])

    @classmethod
    def from_rate_matrix(cls, R, labels: Mapping[str, Sequence[bool]] | None = None,
                         initial: int = 0, action: str = "tau") -> "ComposedCtmc":
        """Wrap an arbitrary rate matrix; states are single-element tuples of indices."""
        R = sp.csr_matrix(R, dtype=float)
        n = R.shape[0]
        states = tuple((i,) for i in range(n))
        if labels is not None:
            labels = {k: _frozen(np.asarray(v, dtype=bool)) for k, v in labels.items()}
        return cls(states, {action: R}, labels, states[initial], generic=True)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_partitions(self) -> int:
        return len(self.states[0]) if self.states else 0

    @property
    def rate_matrix(self) -> sp.csr_matrix:
        """R including self-loops."""
        return self._R

    @property
    def n_transitions(self) -> int:
        """Nonzero entries of R (parallel edges merged, self-loops counted)."""
        return self._R.nnz

    @property
    def n_action_transitions(self) -> int:
        """Transitions counted per action label (before merging parallel edges)."""
        return sum(m.nnz for m in self.action_rates.values())

    @property
    def initial_index(self) -> int:
        return self.index(self.initial_state)

    def index(self, state: Sequence[int]) -> int:
        return self._index[tuple(state)]

    def off_diagonal(self) -> sp.csr_matrix:
        r = self._R.tolil(copy=True)
        r.setdiag(0)
        r = r.tocsr()
        r.eliminate_zeros()
        return r

    def exit_rates(self) -> np.ndarray:
        return np.asarray(self.off_diagonal().sum(axis=1)).ravel()

    def generator(self) -> sp.csr_matrix:
        off = self.off_diagonal()
        q = off - sp.diags(np.asarray(off.sum(axis=1)).ravel())
        return q.tocsr()

    def label(self, name: str) -> np.ndarray:
        if self.labels is None:
            raise ValueError("chain has no labels; call label_states first")
        return self.labels[name]


# --- validation -------------------------------------------------------------

@singledispatch
def validate(model, **context) -> list[Violation]:
    raise TypeError(f"cannot validate {type(model).__name__}")


@validate.register
def _(model: Dfg, **context) -> list[Violation]:
    out = []
    ids = model.node_ids
    if not ids:
        out.append(Violation("non-empty", "nodes", "empty DFG"))
    seen = set()
    for nid in ids:
        if nid in seen:
            out.append(Violation("unique-ids", nid, f"duplicate node id {nid!r}"))
        seen.add(nid)
    for a, b in model.edges:
        for end in (a, b):
            if end not in seen:
                out.append(Violation("edge-endpoints", end,
                                     f"edge ({a}, {b}) references missing node {end!r}"))
    g = model.graph()
    if not nx.is_directed_acyclic_graph(g):
        cycle = nx.find_cycle(g)
        out.append(Violation("acyclic", cycle[0][0], f"cycle through {cycle[0][0]!r}"))
    library = context.get("library")
    if library is not None:
        for n in model.nodes:
            if n.kind not in library:
                out.append(Violation("library-coverage", n.id,
                                     f"kind {n.kind!r} of node {n.id!r} not in library"))
    return out


@validate.register
def _(model: ComponentLibrary, **context) -> list[Violation]:
    return [Violation("nonnegative-bits", k, f"critical_bits for {k!r} is {v}")
            for k, v in model.entries.items() if v < 0]


@validate.register
def _(model: PartitionPlan, **context) -> list[Violation]:
    out = []
    if model.n_partitions < 1:
        out.append(Violation("at-least-one-partition", "cuts", "plan has no partitions"))
    where = {}
    for gi, group in enumerate(model.cuts):
        for nid in group:
            if nid in where:
                out.append(Violation("disjoint", nid,
                                     f"node {nid!r} in groups {where[nid] + 1} and {gi + 1}"))
            else:
                where[nid] = gi
    dfg: Dfg | None = context.get("dfg")
    if dfg is not None:
        for nid in dfg.node_ids:
            if nid not in where:
                out.append(Violation("coverage", nid, f"node {nid!r} not in any group"))
        for nid in where:
            if nid not in set(dfg.node_ids):
                out.append(Violation("coverage", nid, f"group member {nid!r} not in DFG"))
        for a, b in dfg.edges:
            if a in where and b in where and where[a] > where[b]:
                out.append(Violation("topological-order", f"{a}->{b}",
                                     f"edge flows from group {where[a] + 1} back to {where[b] + 1}"))
    return out


@validate.register
def _(model: RateParams, **context) -> list[Violation]:
    out = []
    for name in ("lambda_bit", "mu", "alpha_scu", "alpha_dcu", "lambda_voter",
                 "gamma_same", "gamma_cross", "mission_time"):
        v = getattr(model, name)
        if v is not None and not (np.isfinite(v) and v >= 0):
            out.append(Violation("nonnegative-rates", name, f"{name} = {v}"))
    if abs(model.alpha_scu + model.alpha_dcu - 1.0) > 1e-12:
        out.append(Violation("alpha-sum", "alpha_scu+alpha_dcu",
                             f"alpha_scu + alpha_dcu = {model.alpha_scu + model.alpha_dcu}, not 1"))
    return out


@validate.register
def _(model: CtmcModule, **context) -> list[Violation]:
    out = [Violation("nonnegative-rates", tr.action, f"rate {tr.rate}")
           for tr in model.transitions if not tr.rate >= 0]
    scrubbed = {tr.source for tr in model.transitions if tr.action == SCRUB and tr.rate > 0}
    if scrubbed and scrubbed != set(model.states):
        missing = sorted(set(model.states) - scrubbed)
        out.append(Violation("scrub-everywhere", SCRUB, f"no scrub from states {missing}"))
    return out


@validate.register
def _(model: ComposedCtmc, **context) -> list[Violation]:
    out = []
    if not model.generic and model.n_states != 3 ** model.n_partitions:
        out.append(Violation("state-count", "states",
                             f"{model.n_states} states for {model.n_partitions} partitions"))
    if model.rate_matrix.nnz and model.rate_matrix.data.min() < 0:
        out.append(Violation("nonnegative-rates", "R", "negative rate entry"))
    if model.labels is not None and not model.generic:
        expected = np.array([all(s >= DEGRADED for s in st) for st in model.states])
        bad = np.flatnonzero(expected != model.labels["up"])
        for i in bad:
            out.append(Violation("up-labeling", str(model.states[i]), "wrong up/down label"))
    return out


def global_states(n: int) -> list[tuple[int, ...]]:
    return list(itertools.product(LOCAL_STATES, repeat=n))

