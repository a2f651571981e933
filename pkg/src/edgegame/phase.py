"""Phase-partition counters and the balance checker.

Two counters ship: the dense counter (per-vertex incident-edge counts) and the
random-order counter (global step counts).  A vertex's phase index is 1-based;
phase 0 is the pre-game value.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .errors import ConfigurationError

if TYPE_CHECKING:
    from .game import Transcript


class PhaseKind(Enum):
    DENSE = "dense"
    RANDOM_ORDER = "random_order"


def dense_phase(incident_count: int, b: int, delta: int) -> int:
    """Phase index after `incident_count` incident arrivals: ceil(count*b/delta)."""
    return -(-incident_count * b // delta)


def random_order_phase(i: int, b: int, m: int) -> int:
    """Phase index of global step i: ceil(i*b/m)."""
    return -(-i * b // m)


class PhaseCounter:
    """Online phase bookkeeping for a single game.

    `advance(i, edge)` must be called exactly once per step, in step order,
    with the arriving edge (or None).  It returns the vertices that enter a
    new phase at step i; the caller refreshes their palettes before coloring.
    Arrival times are retained so `phi(v, i)` can be answered for any i up to
    the current step.
    """

    def __init__(self, kind: PhaseKind, b: int, delta: int, m: int, n: int):
        if b < 1:
            raise ConfigurationError("phase count b must be >= 1")
        if kind is PhaseKind.DENSE and b > delta:
            raise ConfigurationError(
                f"dense phase counter requires b <= delta (got b={b}, delta={delta})"
            )
        if kind is PhaseKind.RANDOM_ORDER and b > m:
            raise ConfigurationError(
                f"random-order phase counter requires b <= m (got b={b}, m={m})"
            )
        self.kind = kind
        self.b = b
        self.delta = delta
        self.m = m
        self.n = n
        self.arrivals: list[list[int]] = [[] for _ in range(n)]
        self._phase = [0] * n
        self._global = 0
        self._step = 0

    def advance(self, i: int, edge: Optional[tuple[int, int]]) -> list[int]:
        if i != self._step + 1:
            raise ConfigurationError(f"advance called out of order (step {i} after {self._step})")
        self._step = i
        moved: list[int] = []
        if self.kind is PhaseKind.RANDOM_ORDER:
            g = random_order_phase(i, self.b, self.m)
            if g > self._global:
                self._global = g
                self._phase = [g] * self.n
                moved = list(range(self.n))
        if edge is not None:
            u, v = edge
            for w in (u, v):
                self.arrivals[w].append(i)
                if self.kind is PhaseKind.DENSE:
                    p = dense_phase(len(self.arrivals[w]), self.b, self.delta)
                    if p > self._phase[w]:
                        self._phase[w] = p
                        moved.append(w)
        return moved

    def current_phase(self, v: int) -> int:
        return self._phase[v]

    def phi(self, v: int, i: int) -> int:
        """Phase of vertex v at step i (0 for i=0, and pre-arrival under dense)."""
        if not 0 <= v < self.n:
            raise ConfigurationError(f"unknown vertex id {v}")
        if not 0 <= i <= self._step:
            raise ConfigurationError(f"step {i} outside observed range [0, {self._step}]")
        if i == 0:
            return 0
        if self.kind is PhaseKind.RANDOM_ORDER:
            return random_order_phase(i, self.b, self.m)
        return dense_phase(bisect_right(self.arrivals[v], i), self.b, self.delta)


def phi(counter: PhaseCounter, v: int, i: int) -> int:
    """Functional accessor for the phase of vertex v at step i."""
    return counter.phi(v, i)


def arrival_phases(
    transcript: "Transcript", b: Optional[int] = None, kind: Optional[PhaseKind] = None
) -> list[list[int]]:
    """Per-vertex phase index of each incident arrival, aligned with transcript.arrivals.

    Defaults to the counter the transcript was produced with; passing a
    different b or kind re-partitions the same arrival pattern.
    """
    cfg = transcript.config
    b = cfg.b if b is None else b
    kind = cfg.phase_kind if kind is None else kind
    out: list[list[int]] = []
    for v in range(cfg.n):
        steps = transcript.arrivals[v]
        if kind is PhaseKind.DENSE:
            out.append([dense_phase(k, b, cfg.delta) for k in range(1, len(steps) + 1)])
        else:
            out.append([random_order_phase(i, b, transcript.m) for i in steps])
    return out


@dataclass(frozen=True)
class BalanceWitness:
    vertex: int
    phase: int
    count: int


def is_balanced(
    transcript: "Transcript", b: Optional[int] = None, kind: Optional[PhaseKind] = None
) -> tuple[bool, Optional[BalanceWitness]]:
    """Check that every v-phase holds at most 2*delta/b incident edges.

    The threshold comparison is real-valued (count <= 2*delta/b), evaluated
    exactly as count*b <= 2*delta.  Returns the verdict and, when unbalanced,
    a witness (vertex, phase, count).
    """
    cfg = transcript.config
    b_eff = cfg.b if b is None else b
    phases = arrival_phases(transcript, b=b_eff, kind=kind)
    for v in range(cfg.n):
        counts: dict[int, int] = {}
        for r in phases[v]:
            counts[r] = counts.get(r, 0) + 1
        for r, c in counts.items():
            if c * b_eff > 2 * cfg.delta:
                return False, BalanceWitness(v, r, c)
    return True, None
