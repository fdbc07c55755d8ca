"""Two-phase online testing protocol.

A session first issues the level for the next hypothesis (using only the
history of completed steps), then receives the observed p-value and weight
and records the decision.  Ground truth never enters a session; it lives in
:class:`HypothesisTruth` and is consumed only by :mod:`onlinefwer.metrics`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class ProtocolError(RuntimeError):
    """Raised when the level-then-report order of a session is violated."""


@dataclass(frozen=True)
class HypothesisTruth:
    is_null: bool


@dataclass(frozen=True)
class PValueRecord:
    p: float
    weight: float = 1.0
    sample_size: int = 1

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"weight must lie in [0, 1], got {self.weight!r}")
        if int(self.sample_size) != self.sample_size or self.sample_size < 1:
            raise ValueError(f"sample_size must be a positive integer, got {self.sample_size!r}")


@dataclass(frozen=True)
class DecisionRecord:
    level: float
    rejected: bool


def decide(p: float, level: float) -> bool:
    # non-strict: a p-value equal to its level is a rejection
    return p <= level


@dataclass
class History:
    """Completed steps of one session, oldest first."""

    p: list[float] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    levels: list[float] = field(default_factory=list)
    rejected: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.levels)

    def append(self, p: float, weight: float, level: float, rejected: bool) -> None:
        self.p.append(p)
        self.weights.append(weight)
        self.levels.append(level)
        self.rejected.append(rejected)

    @classmethod
    def from_steps(cls, p, weights, levels, rejected=None) -> "History":
        if rejected is None:
            rejected = [decide(pi, ai) for pi, ai in zip(p, levels)]
        h = cls()
        for row in zip(p, weights, levels, rejected):
            h.append(float(row[0]), float(row[1]), float(row[2]), bool(row[3]))
        return h


class StreamState:
    """Mutable state of a single online testing session.

    ``procedure`` is any object exposing ``level(history) -> float``; every
    procedure in :mod:`onlinefwer.procedures` qualifies.  The session is not
    thread-safe; independent sessions share nothing.

    >>> from onlinefwer.procedures import AlphaSpending
    >>> s = StreamState(AlphaSpending(alpha=0.05))
    >>> round(s.next_level(), 7)
    0.0303964
    >>> s.report(PValueRecord(p=0.01)).rejected
    True
    """

    def __init__(self, procedure):
        self.procedure = procedure
        self.history = History()
        self._pending: float | None = None

    @property
    def step(self) -> int:
        """1-based index of the hypothesis whose level is issued next."""
        return len(self.history) + 1

    @property
    def awaiting_report(self) -> bool:
        return self._pending is not None

    def next_level(self) -> float:
        if self._pending is None:
            level = float(self.procedure.level(self.history))
            if not (0.0 <= level <= 1.0) or math.isnan(level):
                raise ProtocolError(f"procedure produced level {level!r} outside [0, 1]")
            self._pending = level
        return self._pending

    def report(self, record: PValueRecord) -> DecisionRecord:
        if self._pending is None:
            raise ProtocolError("report() called before next_level() for this step")
        level = self._pending
        rejected = decide(record.p, level)
        self.history.append(record.p, record.weight, level, rejected)
        self._pending = None
        return DecisionRecord(level=level, rejected=rejected)

    def run(self, records) -> list[DecisionRecord]:
        """Feed an iterable of records through the protocol one at a time."""
        out = []
        for rec in records:
            self.next_level()
            out.append(self.report(rec))
        return out
