"""A small CSL-flavoured query language over composed chains.

Supported forms::

    P=?[G[0,T] label]        stay within label over [0, T]
    P=?[F[0,T] label]        reach label within [0, T]
    S=?[label]               long-run probability of label
    R{up_time}=?[C<=T]/T     expected fraction of [0, T] spent up
    forall next label        every reachable state can step into label
                             (also written filter(forall, P>0 [X label]))

Times take unit suffixes (``730h``, ``15min``); a bare number is seconds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import engine
from .ingest import IngestError, format_duration, parse_duration
from .model import STATE_LABELS, ComposedCtmc

KINDS = ("reliability", "reachability", "steady_state", "availability", "correctness")


class PropertySyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnsupportedPropertyError(ValueError):
    def __init__(self, construct, position):
        super().__init__(f"unsupported CSL construct: {construct} (position {position})")
        self.construct = construct
        self.position = position


@dataclass(frozen=True)
class PropertyQuery:
    kind: str
    label: str = "up"
    T: float | None = None


_TIME = r"[0-9.]+(?:[eE][-+]?[0-9]+)?[a-zA-Z]*"
_LABEL = r'"?([A-Za-z_][A-Za-z_0-9]*)"?'


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, pattern: str) -> bool:
        self.skip()
        return re.compile(pattern).match(self.text, self.pos) is not None

    def expect(self, pattern: str, what: str) -> re.Match:
        self.skip()
        m = re.compile(pattern).match(self.text, self.pos)
        if m is None:
            found = self.text[self.pos:self.pos + 10] or "end of input"
            raise PropertySyntaxError(f"expected {what}, found {found!r}", self.pos)
        self.pos = m.end()
        return m

    def time(self) -> float:
        start = self.pos
        m = self.expect(_TIME, "a time bound")
        try:
            t = parse_duration(m.group(0))
        except IngestError as exc:
            raise PropertySyntaxError(str(exc), start) from None
        if not t > 0:
            raise PropertySyntaxError("time bound must be positive", start)
        return t

    def label(self) -> str:
        self.skip()
        start = self.pos
        name = self.expect(_LABEL, "a state label").group(1)
        if name == "oper":
            name = "operational"
        if name not in STATE_LABELS:
            raise PropertySyntaxError(f"unknown label {name!r}", start)
        return name

    def end(self):
        self.skip()
        if self.pos != len(self.text):
            raise PropertySyntaxError(f"trailing input {self.text[self.pos:]!r}", self.pos)

    def bound(self) -> float:
        """``[0,T]`` or ``<=T``."""
        if self.peek(r"\["):
            self.expect(r"\[", "'['")
            self.expect(r"0(?:\.0*)?\b", "lower bound 0")
            self.expect(",", "','")
            t = self.time()
            self.expect(r"\]", "']'")
            return t
        if self.peek("<="):
            self.expect("<=", "'<='")
            return self.time()
        raise UnsupportedPropertyError("unbounded temporal operator", self.pos)


def parse_property(text: str) -> PropertyQuery:
    p = _Parser(text)
    p.skip()
    if p.peek(r"filter\b"):
        p.expect(r"filter\s*\(\s*forall\s*,", "'filter(forall,'")
        p.expect(r"P\s*>\s*0\s*\[", "'P>0 ['")
        p.expect(r"X\b", "'X'")
        label = p.label()
        p.expect(r"\]", "']'")
        p.expect(r"\)", "')'")
        p.end()
        return PropertyQuery("correctness", label)
    if p.peek(r"forall\b"):
        p.expect(r"forall\s+next\b", "'forall next'")
        label = p.label()
        p.end()
        return PropertyQuery("correctness", label)
    if p.peek(r"P\s*(<=|>=|<|>)"):
        raise UnsupportedPropertyError("probability bound (use P=?)", p.pos)
    if p.peek(r"P\s*=\s*\?"):
        p.expect(r"P\s*=\s*\?\s*\[", "'P=?['")
        if p.peek(r"[GF]\b|[GF]\s*[\[<]"):
            op = p.expect(r"[GF]", "G or F").group(0)
            T = p.bound()
            label = p.label()
            p.expect(r"\]", "']'")
            p.end()
            return PropertyQuery("reliability" if op == "G" else "reachability", label, T)
        if p.peek(r"X\b"):
            raise UnsupportedPropertyError("next operator outside forall filter", p.pos)
        start = p.pos
        p.label()
        if p.peek(r"U\b"):
            raise UnsupportedPropertyError("until", start)
        raise PropertySyntaxError("expected G or F path operator", start)
    if p.peek(r"S\s*(<=|>=|<|>)"):
        raise UnsupportedPropertyError("steady-state bound (use S=?)", p.pos)
    if p.peek(r"S\s*=\s*\?"):
        p.expect(r"S\s*=\s*\?\s*\[", "'S=?['")
        label = p.label()
        p.expect(r"\]", "']'")
        p.end()
        return PropertyQuery("steady_state", label)
    if p.peek(r"R\s*\{"):
        p.expect(r'R\s*\{\s*"?up_time"?\s*\}\s*=\s*\?\s*\[', "'R{up_time}=?['")
        p.expect(r"C\s*<=", "'C<='")
        T = p.time()
        p.expect(r"\]", "']'")
        p.expect("/", "'/T'")
        start = p.pos
        divisor = p.time()
        if divisor != T:
            raise PropertySyntaxError("divisor must equal the cumulative bound", start)
        p.end()
        return PropertyQuery("availability", "up", T)
    raise PropertySyntaxError("unrecognised property", p.pos)


def format_property(q: PropertyQuery) -> str:
    if q.kind == "reliability":
        return f"P=?[G[0,{format_duration(q.T)}] {q.label}]"
    if q.kind == "reachability":
        return f"P=?[F[0,{format_duration(q.T)}] {q.label}]"
    if q.kind == "steady_state":
        return f"S=?[{q.label}]"
    if q.kind == "availability":
        t = format_duration(q.T)
        return f"R{{up_time}}=?[C<={t}]/{t}"
    if q.kind == "correctness":
        return f"forall next {q.label}"
    raise ValueError(f"unknown property kind {q.kind!r}")


def evaluate_property(q: PropertyQuery, chain: ComposedCtmc, eps: float = 1e-10):
    """Numeric value of the query (bool for correctness)."""
    if q.kind == "reliability":
        return engine.reliability(chain, q.T, eps, q.label)
    if q.kind == "reachability":
        return engine.reachability(chain, q.T, eps, q.label)
    if q.kind == "steady_state":
        pi = engine.steady_state(chain)
        return float(pi[np.asarray(chain.label(q.label), dtype=bool)].sum())
    if q.kind == "availability":
        return engine.availability(chain, q.T, eps, q.label)
    if q.kind == "correctness":
        return engine.check_scrub_recoverability(chain, q.label)
    raise ValueError(f"unknown property kind {q.kind!r}")
