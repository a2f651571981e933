"""Exact small-instance oracles: brute-force enumeration of outcome
distributions, the star-gadget failure probability, and independent
recomputations used to validate the incremental trackers.

Everything here is exact rational arithmetic; the size caps are hard errors,
never silent truncation.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from math import comb
from typing import Optional, Sequence

from .colorset import ColorSet
from .errors import ConfigurationError, OracleCapError
from .game import ColorerKind, EdgeEvent, GameConfig, Transcript, run_game
from .instrument import MartingaleTrace, TraceRecorder, TrackedSetFamily
from .phase import PhaseKind

MAX_ORACLE_EDGES = 4
MAX_ORACLE_VERTICES = 4
MAX_ORACLE_GAMMA = 4

Outcome = tuple[Optional[int], ...]


@dataclass
class OutcomeDistribution:
    """Exact distribution over (final color per non-null step, None = failed)."""

    probabilities: dict[Outcome, Fraction]

    def total(self) -> Fraction:
        return sum(self.probabilities.values(), Fraction(0))

    def failure_probability(self, position: int) -> Fraction:
        """Probability that the `position`-th non-null edge is left uncolored."""
        return sum(
            (p for o, p in self.probabilities.items() if o[position] is None), Fraction(0)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OutcomeDistribution):
            return NotImplemented
        a = {k: v for k, v in self.probabilities.items() if v}
        b = {k: v for k, v in other.probabilities.items() if v}
        return a == b


def _validate_schedule(schedule: Sequence[EdgeEvent]) -> tuple[list[EdgeEvent], list[int]]:
    edges = []
    seen = set()
    for e in schedule:
        if e is None:
            continue
        u, v = e
        if u == v:
            raise ConfigurationError(f"self-loop {e} in schedule")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ConfigurationError(f"repeated edge {key} in schedule")
        seen.add(key)
        edges.append(key)
    verts = sorted({w for e in edges for w in e})
    return edges, verts


def exact_outcome_distribution(
    schedule: Sequence[EdgeEvent],
    colorer_kind: ColorerKind,
    gamma_size: int,
    b: int,
    phase_kind: PhaseKind = PhaseKind.DENSE,
    delta: Optional[int] = None,
    include_preliminary: bool = False,
) -> OutcomeDistribution:
    """Enumerate every random branch of a colorer on a fixed schedule.

    This is a from-scratch implementation of the step semantics (its own free
    sets, palettes, and phase bookkeeping), so it cross-checks the engine
    rather than replaying it.  Caps: <= 4 edges, <= 4 vertices, gamma <= 4.

    With include_preliminary each outcome entry is (preliminary, final)
    instead of just the final color.  Final-color distributions cannot
    distinguish palette bookkeeping bugs (the resample step makes the final
    uniform on the free intersection for any palette superset), so engine
    cross-checks of the phase/palette colorer compare augmented outcomes.
    """
    edges, verts = _validate_schedule(schedule)
    if len(edges) > MAX_ORACLE_EDGES:
        raise OracleCapError(f"{len(edges)} edges exceed the {MAX_ORACLE_EDGES}-edge cap")
    if len(verts) > MAX_ORACLE_VERTICES:
        raise OracleCapError(f"{len(verts)} vertices exceed the {MAX_ORACLE_VERTICES}-vertex cap")
    if not 1 <= gamma_size <= MAX_ORACLE_GAMMA:
        raise OracleCapError(f"gamma {gamma_size} outside [1, {MAX_ORACLE_GAMMA}]")
    if b < 1:
        raise ConfigurationError("b must be >= 1")
    deg: dict[int, int] = defaultdict(int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    max_deg = max(deg.values(), default=1)
    delta = max_deg if delta is None else delta
    if delta < max_deg:
        raise ConfigurationError(f"delta {delta} below realized max degree {max_deg}")
    m = len(schedule)
    index = {w: k for k, w in enumerate(verts)}
    full = (1 << gamma_size) - 1
    nv = len(verts)

    def dense_phase(c: int) -> int:
        return -(-c * b // delta)

    def global_phase(i: int) -> int:
        return -(-i * b // m)

    dist: dict[Outcome, Fraction] = defaultdict(lambda: Fraction(0))

    def rec(idx: int, free: tuple, pal: tuple, cnt: tuple, acc: tuple, w: Fraction) -> None:
        if idx == len(schedule):
            dist[acc] += w
            return
        i = idx + 1
        e = schedule[idx]
        if phase_kind is PhaseKind.RANDOM_ORDER and global_phase(i) > global_phase(i - 1):
            pal = free
        if e is None:
            rec(idx + 1, free, pal, cnt, acc, w)
            return
        u, v = index[e[0]], index[e[1]]
        if phase_kind is PhaseKind.DENSE:
            pl = list(pal)
            for x in (u, v):
                if dense_phase(cnt[x] + 1) > dense_phase(cnt[x]):
                    pl[x] = free[x]
            pal = tuple(pl)
        cl = list(cnt)
        cl[u] += 1
        cl[v] += 1
        cnt = tuple(cl)
        ff = free[u] & free[v]
        aa = pal[u] & pal[v]

        def color(c: Optional[int], w2: Fraction, prelim: Optional[int] = None) -> None:
            entry = (prelim, c) if include_preliminary else c
            if c is None:
                rec(idx + 1, free, pal, cnt, acc + (entry,), w2)
                return
            bit = 1 << c
            fl = list(free)
            fl[u] &= ~bit
            fl[v] &= ~bit
            rec(idx + 1, tuple(fl), pal, cnt, acc + (entry,), w2)

        if colorer_kind is ColorerKind.FIRST_FIT:
            color((ff & -ff).bit_length() - 1 if ff else None, w)
        elif colorer_kind is ColorerKind.RANDOM_GREEDY:
            if ff == 0:
                color(None, w)
            else:
                share = w / ff.bit_count()
                mask = ff
                while mask:
                    low = mask & -mask
                    color(low.bit_length() - 1, share)
                    mask ^= low
        else:  # PHASE_PALETTE
            if aa == 0:
                color(None, w)
            else:
                share = w / aa.bit_count()
                final_share = share / ff.bit_count() if ff else None
                mask = aa
                while mask:
                    low = mask & -mask
                    prelim = low.bit_length() - 1
                    mask ^= low
                    if ff & low:
                        color(prelim, share, prelim)
                    elif ff == 0:
                        color(None, share, prelim)
                    else:
                        fmask = ff
                        while fmask:
                            flow = fmask & -fmask
                            color(flow.bit_length() - 1, final_share, prelim)
                            fmask ^= flow

    start = (full,) * nv
    rec(0, start, start, (0,) * nv, (), Fraction(1))
    result = OutcomeDistribution(dict(dist))
    if result.total() != 1:
        raise AssertionError("oracle distribution mass is not exactly 1")
    return result


# ---------------------------------------------------------------------------
# enumerating the engine itself (scripted random stream)

class _NeedDraw(Exception):
    def __init__(self, k: int):
        self.k = k


class _ScriptedRng:
    """random.Random stand-in replaying a fixed rank script; raises when exhausted."""

    def __init__(self, script: Sequence[tuple[int, int]]):
        self.script = script
        self.pos = 0

    def randrange(self, k: int) -> int:
        if self.pos >= len(self.script):
            raise _NeedDraw(k)
        j, expected_k = self.script[self.pos]
        if expected_k != k:
            raise AssertionError("engine consumed draws in a different order than scripted")
        self.pos += 1
        return j


def enumerate_engine_runs(
    builder_factory,
    config: GameConfig,
    family: Optional[TrackedSetFamily] = None,
) -> list[tuple[Fraction, Transcript]]:
    """Run the real engine over every possible rank sequence, with exact weights.

    `builder_factory()` must return a fresh builder per invocation (strategies
    are stateful per run).  The result is the engine's exact outcome
    distribution, branch by branch.
    """
    leaves: list[tuple[Fraction, Transcript]] = []
    stack: list[list[tuple[int, int]]] = [[]]
    while stack:
        script = stack.pop()
        rng = _ScriptedRng(script)
        recorder = TraceRecorder(family, config.gamma_size) if family is not None else None
        try:
            transcript = run_game(builder_factory(), config, rng=rng, recorder=recorder)
        except _NeedDraw as nd:
            stack.extend(script + [(j, nd.k)] for j in range(nd.k))
            continue
        if family is not None:
            transcript.trace = recorder.trace
            recorder.trace.transcript = transcript
        weight = Fraction(1)
        for _, k in script:
            weight /= k
        leaves.append((weight, transcript))
    return leaves


def engine_outcome_distribution(
    schedule: Sequence[EdgeEvent],
    colorer_kind: ColorerKind,
    gamma_size: int,
    b: int,
    phase_kind: PhaseKind = PhaseKind.DENSE,
    delta: Optional[int] = None,
    include_preliminary: bool = False,
) -> tuple[OutcomeDistribution, list[EdgeEvent], GameConfig]:
    """Exact outcome distribution of the engine itself on a small schedule.

    Returns the distribution, the padded slot list actually played (the game
    runs for m = floor(delta*n/2) steps), and the config used, so callers can
    feed the identical schedule and parameters to `exact_outcome_distribution`.
    """
    from .builders import ObliviousSchedule

    edges, verts = _validate_schedule(schedule)
    if len(edges) > MAX_ORACLE_EDGES:
        raise OracleCapError(f"{len(edges)} edges exceed the {MAX_ORACLE_EDGES}-edge cap")
    deg: dict[int, int] = defaultdict(int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    max_deg = max(deg.values(), default=1)
    # delta may exceed the realized degree; gamma <= 2*delta-1 must hold and
    # the dense counter needs b <= delta.
    if delta is None:
        delta = max(max_deg, gamma_size // 2 + 1, b)
    n = max(2, (max(verts) + 1) if verts else 2)
    config = GameConfig.with_palette_size(
        n=n, delta=delta, gamma_size=gamma_size, b=b,
        phase_kind=phase_kind, colorer_kind=colorer_kind,
    )
    slots: list[EdgeEvent] = list(schedule) + [None] * (config.m - len(schedule))
    if len(slots) > config.m:
        raise ConfigurationError("schedule longer than the step budget m")
    dist: dict[Outcome, Fraction] = defaultdict(lambda: Fraction(0))
    for weight, transcript in enumerate_engine_runs(lambda: ObliviousSchedule(slots), config):
        if include_preliminary:
            key = tuple((o.preliminary, o.final) for o in transcript.outcomes if o.edge is not None)
        else:
            key = tuple(o.final for o in transcript.outcomes if o.edge is not None)
        dist[key] += weight
    result = OutcomeDistribution(dict(dist))
    if result.total() != 1:
        raise AssertionError("engine distribution mass is not exactly 1")
    return result, slots, config


# ---------------------------------------------------------------------------
# star gadget

def gadget_failure_probability(delta: int, gamma_size: int) -> Fraction:
    """Exact probability that the gadget's center edge is uncolorable.

    Enumerates the two independent star colorings (each leaves a uniform
    (gamma - delta + 1)-subset free at the center vertex) and cross-checks
    the closed form C(gamma-a, a)/C(gamma, a) with a = gamma - delta + 1.
    """
    if delta < 2:
        raise ConfigurationError("gadget needs delta >= 2")
    if gamma_size < delta:
        raise ConfigurationError("gadget stars need gamma >= delta to finish")
    if gamma_size > 16:
        raise OracleCapError("gadget enumeration capped at gamma <= 16")
    full = (1 << gamma_size) - 1
    dist: dict[int, Fraction] = {full: Fraction(1)}
    for _ in range(delta - 1):
        nxt: dict[int, Fraction] = defaultdict(lambda: Fraction(0))
        for mask, p in dist.items():
            share = p / mask.bit_count()
            rest = mask
            while rest:
                low = rest & -rest
                nxt[mask ^ low] += share
                rest ^= low
        dist = dict(nxt)
    fail = Fraction(0)
    items = list(dist.items())
    for mask_a, pa in items:
        for mask_b, pb in items:
            if mask_a & mask_b == 0:
                fail += pa * pb
    a = gamma_size - delta + 1
    closed = Fraction(comb(gamma_size - a, a), comb(gamma_size, a))
    if fail != closed:
        raise AssertionError(
            f"gadget enumeration {fail} disagrees with closed form {closed}"
        )
    return fail


# ---------------------------------------------------------------------------
# independent recomputations

def brute_force_delta(transcript: Transcript, v: int, r: int, s: ColorSet) -> Fraction:
    """delta^r(v, S) straight from the recorded palette snapshots."""
    snap = transcript.snapshot(v, r)
    if len(snap) == 0:
        raise ConfigurationError(f"empty snapshot for vertex {v} phase {r}")
    return Fraction(len(snap & s), len(snap)) - Fraction(len(s), transcript.config.gamma_size)


def window_scan_drift(
    trace: MartingaleTrace, u: int, v: int
) -> tuple[Fraction, Optional[tuple[int, int]]]:
    """Largest |window sum| of pair drift, by scanning all O(T^2) windows."""
    idx = trace.family.pair_index(u, v)
    events = trace.pair_events[idx]
    best = 0
    window: Optional[tuple[int, int]] = None
    for a in range(len(events)):
        run = 0
        for bpos in range(a, len(events)):
            run += events[bpos][1]
            if abs(run) > best:
                best = abs(run)
                window = (events[a][0], events[bpos][0])
    return Fraction(best, trace.scale), window


def recompute_atypical(
    trace: MartingaleTrace, v: int, set_idx: int, threshold
) -> tuple[bool, Fraction]:
    """Atypicality flag rebuilt from the per-step X and p values with plain
    Fraction arithmetic (no common-denominator scaling)."""
    t = trace.transcript
    phases = t.phases()[v]
    big_r = t.num_phases(v)
    inner = [Fraction(0)] * (big_r + 1)
    for i, ph in zip(t.arrivals[v], phases):
        inner[ph] += trace.x(i, set_idx) - trace.p(i, set_idx)
    cum = Fraction(0)
    best = Fraction(0)
    for r in range(1, big_r + 1):
        cum += Fraction(1, t.snapshots[v][r].bit_count()) * inner[r]
        if abs(cum) > best:
            best = abs(cum)
    return best > Fraction(threshold), best


def exact_hypergeometric_tail(m: int, d: int, k: int, x0: int) -> Fraction:
    """P(X >= x0) for X hypergeometric(m, d, k), by direct summation."""
    if not (0 <= d <= m and 0 <= k <= m):
        raise ConfigurationError("need 0 <= d, k <= m")
    total = comb(m, k)
    acc = 0
    for x in range(max(x0, 0), min(d, k) + 1):
        acc += comb(d, x) * comb(m - d, k - x)
    return Fraction(acc, total)


# ---------------------------------------------------------------------------
# schedule enumeration for the equivalence sweep

def canonical_small_schedules(
    max_edges: int = 4, max_vertices: int = 4
) -> list[tuple[tuple[int, int], ...]]:
    """All edge schedules up to the caps, deduplicated up to vertex relabeling.

    Relabeling commutes with every step of the game, so one representative
    per isomorphism class covers the full labeled family.
    """
    all_edges = [
        (u, v) for u in range(max_vertices) for v in range(u + 1, max_vertices)
    ]
    perms = list(permutations(range(max_vertices)))
    seen: set[tuple] = set()
    out: list[tuple[tuple[int, int], ...]] = []

    def canon(seq: tuple[tuple[int, int], ...]) -> tuple:
        best = None
        for pi in perms:
            cand = tuple(
                (min(pi[u], pi[v]), max(pi[u], pi[v])) for u, v in seq
            )
            if best is None or cand < best:
                best = cand
        return best

    def extend(seq: tuple[tuple[int, int], ...]) -> None:
        if seq:
            key = canon(seq)
            if key in seen:
                return
            seen.add(key)
            out.append(key)
        if len(seq) == max_edges:
            return
        used = set(seq)
        for e in all_edges:
            if e not in used:
                extend(seq + (e,))

    extend(())
    return out


def random_order_schedules(edges: Sequence[tuple[int, int]], trials: int, seed: int):
    """Sample shuffled copies of an edge list (for uniformity tests)."""
    rng = random.Random(seed)
    for _ in range(trials):
        order = list(edges)
        rng.shuffle(order)
        yield tuple(order)
