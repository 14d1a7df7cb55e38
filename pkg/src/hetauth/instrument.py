"""Operation counting for the P/M/E/H cost model.

Algebra and hash primitives call :func:`record` on every pairing, G1 scalar
multiplication, G2 exponentiation and hash evaluation.  Nothing is counted
unless a counter is active *and* the caller has opened a scope naming the
entity and protocol phase, so protocol code only labels who is working and
the counts themselves come from the primitives.

    counter = OpCounter()
    with counting(counter):
        with op_scope("user", "authentication", "signcrypt"):
            ...
    counter.total("user", "authentication")
"""

from __future__ import annotations

import contextvars
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

PAIRING = "P"
G1_MULT = "M"
G2_EXP = "E"
HASH = "H"

_KINDS = (PAIRING, G1_MULT, G2_EXP, HASH)

ScopeKey = Tuple[str, str, str]

_counter: contextvars.ContextVar[Optional["OpCounter"]] = contextvars.ContextVar(
    "hetauth_counter", default=None
)
_scope: contextvars.ContextVar[Optional[ScopeKey]] = contextvars.ContextVar(
    "hetauth_scope", default=None
)


@dataclass
class OpCounts:
    pairings: int = 0
    g1_mults: int = 0
    g2_exps: int = 0
    hashes: int = 0
    labels: Counter = field(default_factory=Counter)

    def add(self, kind: str, label: str = "") -> None:
        if kind == PAIRING:
            self.pairings += 1
        elif kind == G1_MULT:
            self.g1_mults += 1
        elif kind == G2_EXP:
            self.g2_exps += 1
        elif kind == HASH:
            self.hashes += 1
        else:
            raise ValueError(f"unknown operation kind {kind!r}")
        if label:
            self.labels[label] += 1

    def __iadd__(self, other: "OpCounts") -> "OpCounts":
        self.pairings += other.pairings
        self.g1_mults += other.g1_mults
        self.g2_exps += other.g2_exps
        self.hashes += other.hashes
        self.labels.update(other.labels)
        return self

    def notation(self) -> str:
        """Render in the ``3P+4M+6H`` style used by cost tables."""
        parts = []
        for n, sym in (
            (self.pairings, "P"),
            (self.g2_exps, "E"),
            (self.g1_mults, "M"),
            (self.hashes, "H"),
        ):
            if n:
                parts.append(f"{n}{sym}" if n > 1 else sym)
        return "+".join(parts) or "0"

    def as_dict(self) -> Dict[str, int]:
        return {
            "P": self.pairings,
            "M": self.g1_mults,
            "E": self.g2_exps,
            "H": self.hashes,
        }


class OpCounter:
    """Counts keyed by ``(entity, phase, step)``."""

    def __init__(self) -> None:
        self._scopes: Dict[ScopeKey, OpCounts] = {}

    def record(self, key: ScopeKey, kind: str, label: str = "") -> None:
        self._scopes.setdefault(key, OpCounts()).add(kind, label)

    def reset(self) -> None:
        self._scopes.clear()

    def scopes(self) -> Dict[ScopeKey, OpCounts]:
        return dict(self._scopes)

    def total(
        self,
        entity: Optional[str] = None,
        phase: Optional[str] = None,
        step: Optional[str] = None,
    ) -> OpCounts:
        out = OpCounts()
        for (e, p, s), counts in self._scopes.items():
            if entity is not None and e != entity:
                continue
            if phase is not None and p != phase:
                continue
            if step is not None and s != step:
                continue
            out += counts
        return out

    def entities(self) -> list:
        return sorted({e for e, _, _ in self._scopes})

    def phases(self, entity: str) -> list:
        return sorted({p for e, p, _ in self._scopes if e == entity})

    def steps(self, entity: str, phase: str) -> list:
        return sorted({s for e, p, s in self._scopes if e == entity and p == phase})


def record(kind: str, label: str = "") -> None:
    counter = _counter.get()
    if counter is None:
        return
    key = _scope.get()
    if key is None:
        key = ("unscoped", "unscoped", "")
    counter.record(key, kind, label)


@contextmanager
def counting(counter: OpCounter) -> Iterator[OpCounter]:
    token = _counter.set(counter)
    try:
        yield counter
    finally:
        _counter.reset(token)


@contextmanager
def op_scope(entity: str, phase: str, step: str = "") -> Iterator[None]:
    token = _scope.set((entity, phase, step))
    try:
        yield
    finally:
        _scope.reset(token)


@contextmanager
def suspended() -> Iterator[None]:
    """Stop counting for the duration, e.g. while a test inspects state."""
    token = _counter.set(None)
    try:
        yield
    finally:
        _counter.reset(token)
