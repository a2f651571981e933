"""Per-step martingale bookkeeping, vertex/palette error terms, and the three
bad-event detectors.

Conventions (applied uniformly): for a null step, or a step whose edge ends
up uncolored, every tracked quantity (Z, q, X, Y, p, D) is zero.  The
collision indicator Z is 1 only when the preliminary color was invalid AND
the edge was then successfully colored.  With these conventions the
three-term decomposition of the palette error holds pathwise, so any
violation flags an implementation bug rather than bad luck.

Probabilities are stored as integers scaled by L = lcm(1..gamma): every
denominator that can occur (a palette or intersection size) divides L, so
all detector sums and comparisons are exact integer arithmetic.  Accessors
return `Fraction` values.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .colorset import ColorSet
from .errors import ConfigurationError, DegeneratePaletteError, TrackingError
from .game import (
    EdgeEvent,
    GameConfig,
    GameState,
    StepOutcome,
    Transcript,
    run_game,
)

Edge = tuple[int, int]

MAX_TRACKED_SETS = 1024


@dataclass
class TrackedSetFamily:
    """The color sets and vertex pairs whose martingale variables are recorded."""

    sets: list[ColorSet] = field(default_factory=list)
    pairs: list[Edge] = field(default_factory=list)

    def __post_init__(self):
        if len(self.sets) > MAX_TRACKED_SETS:
            raise ConfigurationError(f"tracked family larger than {MAX_TRACKED_SETS}")
        self.pairs = [(min(u, v), max(u, v)) for u, v in self.pairs]

    @classmethod
    def default_family(
        cls,
        gamma_size: int,
        count: int = 32,
        seed: int = 0,
        pairs: Optional[list[Edge]] = None,
    ) -> "TrackedSetFamily":
        """`count` uniform-random sets cycling through sizes gamma/4, gamma/2, 3*gamma/4."""
        rng = random.Random(seed)
        sizes = [max(1, gamma_size // 4), max(1, gamma_size // 2), max(1, 3 * gamma_size // 4)]
        sets = [
            ColorSet.from_colors(rng.sample(range(gamma_size), sizes[k % 3]), gamma_size)
            for k in range(count)
        ]
        return cls(sets=sets, pairs=list(pairs or []))

    def set_index(self, s: ColorSet) -> int:
        for idx, t in enumerate(self.sets):
            if t == s:
                return idx
        raise TrackingError(f"color set {s!r} is not tracked")

    def pair_index(self, u: int, v: int) -> int:
        key = (min(u, v), max(u, v))
        try:
            return self.pairs.index(key)
        except ValueError:
            raise TrackingError(f"pair {key} is not monitored") from None


class MartingaleTrace:
    """Raw per-step record of Z, q and, per tracked set, X, Y, p."""

    def __init__(self, family: TrackedSetFamily, gamma_size: int):
        self.family = family
        self.gamma_size = gamma_size
        self.scale = math.lcm(*range(1, gamma_size + 1))
        self.z_mask = 0
        self.colored_steps = 0  # bitmask over steps
        self.q_scaled: list[int] = []
        self.x_masks = [0] * len(family.sets)
        self.y_masks = [0] * len(family.sets)
        self.p_scaled: list[list[int]] = [[] for _ in family.sets]
        self.pair_events: list[list[tuple[int, int]]] = [[] for _ in family.pairs]
        self.transcript: Optional[Transcript] = None
        self._z_list: Optional[list[int]] = None
        self._colored_list: Optional[list[int]] = None
        self._x_lists: Optional[list[list[int]]] = None

    @property
    def m(self) -> int:
        return len(self.q_scaled)

    def _materialize(self) -> tuple[list[int], list[int], list[list[int]]]:
        # per-step lists; extracting bits from the m-bit masks once avoids
        # O(m) big-int shifts inside detector loops
        if self._z_list is None:
            m = self.m
            zm, cm = self.z_mask, self.colored_steps
            self._z_list = [(zm >> k) & 1 for k in range(m)]
            self._colored_list = [(cm >> k) & 1 for k in range(m)]
            self._x_lists = [[(xm >> k) & 1 for k in range(m)] for xm in self.x_masks]
        return self._z_list, self._colored_list, self._x_lists

    def z(self, i: int) -> int:
        return (self.z_mask >> (i - 1)) & 1

    def colored(self, i: int) -> bool:
        return (self.colored_steps >> (i - 1)) & 1 == 1

    def q(self, i: int) -> Fraction:
        return Fraction(self.q_scaled[i - 1], self.scale)

    def x(self, i: int, set_idx: int) -> int:
        return (self.x_masks[set_idx] >> (i - 1)) & 1

    def y(self, i: int, set_idx: int) -> int:
        return (self.y_masks[set_idx] >> (i - 1)) & 1

    def p(self, i: int, set_idx: int) -> Fraction:
        return Fraction(self.p_scaled[set_idx][i - 1], self.scale)

    def d(self, i: int, set_idx: int) -> Fraction:
        return Fraction(self.d_scaled(i, set_idx), self.scale)

    def d_scaled(self, i: int, set_idx: int) -> int:
        return self.x(i, set_idx) * self.scale - self.p_scaled[set_idx][i - 1]

    def collision_count(self) -> int:
        return self.z_mask.bit_count()


class TraceRecorder:
    """Step hook wired into the game loop; fills a MartingaleTrace."""

    def __init__(self, family: TrackedSetFamily, gamma_size: int):
        self.trace = MartingaleTrace(family, gamma_size)
        self._aa = 0
        self._ff = 0
        self._pair_masks: list[tuple[int, int]] = []  # (pair_idx, S_i mask)

    def begin_step(self, state: GameState, i: int, edge: EdgeEvent, aa: int, ff: int) -> None:
        self._aa = aa
        self._ff = ff
        self._pair_masks = []
        if edge is None:
            return
        u, v = edge
        for idx, (a, b) in enumerate(self.trace.family.pairs):
            if u in (a, b) or v in (a, b):
                # the dynamic set is the pair's free intersection before this
                # step's coloring
                self._pair_masks.append((idx, state.free[a] & state.free[b]))

    def end_step(self, outcome: StepOutcome) -> None:
        tr = self.trace
        tr._z_list = None  # invalidate detector caches while the run is live
        L = tr.scale
        i = outcome.step
        bit = 1 << (i - 1)
        if outcome.edge is None:
            tr.q_scaled.append(0)
            for ps in tr.p_scaled:
                ps.append(0)
            return
        colored = outcome.final is not None
        aa, ff = self._aa, self._ff
        if colored:
            tr.colored_steps |= bit
            if outcome.collision:
                tr.z_mask |= bit
        if ff:
            ld = L // aa.bit_count()
            tr.q_scaled.append(L - ff.bit_count() * ld)
        else:
            ld = 0
            tr.q_scaled.append(0)
        prelim_bit = 1 << outcome.preliminary if outcome.preliminary is not None else 0
        final_bit = 1 << outcome.final if colored else 0
        for s_idx, s in enumerate(tr.family.sets):
            if colored:
                tr.p_scaled[s_idx].append((aa & s.mask).bit_count() * ld)
                if prelim_bit & s.mask:
                    tr.x_masks[s_idx] |= bit
                if final_bit & s.mask:
                    tr.y_masks[s_idx] |= bit
            else:
                tr.p_scaled[s_idx].append(0)
        for pair_idx, s_mask in self._pair_masks:
            if colored:
                x = 1 if prelim_bit & s_mask else 0
                p = (aa & s_mask).bit_count() * ld
                tr.pair_events[pair_idx].append((i, x * L - p))
            else:
                tr.pair_events[pair_idx].append((i, 0))


def run_traced_game(
    builder,
    config: GameConfig,
    family: TrackedSetFamily,
    *,
    rng: Optional[random.Random] = None,
    builder_rng: Optional[random.Random] = None,
    builder_name: Optional[str] = None,
) -> Transcript:
    """run_game with a martingale trace attached at transcript.trace."""
    recorder = TraceRecorder(family, config.gamma_size)
    transcript = run_game(
        builder, config, rng=rng, builder_rng=builder_rng,
        recorder=recorder, builder_name=builder_name,
    )
    transcript.trace = recorder.trace
    recorder.trace.transcript = transcript
    return transcript


# ---------------------------------------------------------------------------
# per-step probabilities

def compute_q(state: GameState, edge: Edge) -> Fraction:
    """Collision probability for the next edge: 1 - |F&F| / |A&A| (0 if F&F is empty)."""
    u, v = edge
    ff = state.free[u] & state.free[v]
    aa = state.palette[u] & state.palette[v]
    if ff == 0 or aa == 0:
        return Fraction(0)
    return 1 - Fraction(ff.bit_count(), aa.bit_count())


def compute_p(state: GameState, edge: Edge, s: ColorSet) -> Fraction:
    """Probability the preliminary color lands in s: |A&A&S| / |A&A| (0 if A&A is empty)."""
    u, v = edge
    aa = state.palette[u] & state.palette[v]
    if aa == 0:
        return Fraction(0)
    return Fraction((aa & s.mask).bit_count(), aa.bit_count())


# ---------------------------------------------------------------------------
# vertex error delta^r(v, S)

def delta(transcript: Transcript, v: int, r: int, s: ColorSet) -> Fraction:
    """Error of v w.r.t. s after phase r, rebuilt incrementally from final colors.

    |A^r(v) & S| is accumulated as |S| minus the s-hits among colored incident
    edges in phases <= r; the snapshot contents themselves are never read, so
    this is an independent route from the snapshot-based oracle.
    """
    cfg = transcript.config
    if s.universe != cfg.gamma_size:
        raise ConfigurationError("tracked set universe differs from the game palette")
    if not 0 <= v < cfg.n:
        raise ConfigurationError(f"unknown vertex id {v}")
    if not 0 <= r <= transcript.num_phases(v):
        raise ConfigurationError(f"vertex {v} did not complete phase {r}")
    phases = transcript.phases()[v]
    colored = 0
    hits = 0
    for step_id, ph in zip(transcript.arrivals[v], phases):
        if ph > r:
            break
        out = transcript.outcomes[step_id - 1]
        if out.final is not None:
            colored += 1
            if out.final in s:
                hits += 1
    size_a = cfg.gamma_size - colored
    if size_a == 0:
        raise DegeneratePaletteError(f"palette of vertex {v} empty after phase {r}")
    return Fraction(len(s) - hits, size_a) - Fraction(len(s), cfg.gamma_size)


def max_abs_delta(transcript: Transcript, family: TrackedSetFamily) -> Fraction:
    """max |delta^r(v, S)| over all vertices, completed phases, and tracked sets."""
    cfg = transcript.config
    g = cfg.gamma_size
    L = math.lcm(*range(1, g + 1))
    lg = L // g
    best = 0
    for v in range(cfg.n):
        snaps = transcript.snapshots[v]
        for snap in snaps:
            size = snap.bit_count()
            if size == 0:
                raise DegeneratePaletteError(f"empty palette snapshot at vertex {v}")
            la = L // size
            for s in family.sets:
                val = abs((snap & s.mask).bit_count() * la - len(s) * lg)
                if val > best:
                    best = val
    return Fraction(best, L)


# ---------------------------------------------------------------------------
# bad-event detectors

def _threshold_scaled(threshold, scale: int) -> Fraction:
    return Fraction(threshold) * scale


def detect_W(trace: MartingaleTrace, v: int, threshold) -> tuple[bool, Fraction]:
    """Too-many-collisions check: max over j of sum_{i in T(v), i<=j} (Z_i - q_i).

    The maximum includes the empty prefix (value 0), which cannot change the
    verdict for the positive thresholds the event is defined with.  Flags
    strictly above `threshold` (nominally alpha*delta).
    """
    tr = trace
    if tr.transcript is None:
        raise TrackingError("trace is not attached to a transcript")
    L = tr.scale
    z_list, _, _ = tr._materialize()
    q_list = tr.q_scaled
    run = 0
    best = 0
    for i in tr.transcript.arrivals[v]:
        run += z_list[i - 1] * L - q_list[i - 1]
        if run > best:
            best = run
    return Fraction(best, L) > Fraction(threshold), Fraction(best, L)


def detect_atypical(trace: MartingaleTrace, v: int, s: ColorSet | int, threshold) -> tuple[bool, Fraction]:
    """S-atypicality: some phase r with |sum_{l<=r} (1/|A^l(v)|) sum_{i in T^l(v)} D_i(S)|
    strictly above `threshold` (nominally alpha/eps).  `s` is a tracked set
    or its index in the family."""
    tr = trace
    t = tr.transcript
    if t is None:
        raise TrackingError("trace is not attached to a transcript")
    set_idx = s if isinstance(s, int) else tr.family.set_index(s)
    if not 0 <= set_idx < len(tr.family.sets):
        raise TrackingError(f"set index {set_idx} out of range")
    L = tr.scale
    _, _, x_lists = tr._materialize()
    xs = x_lists[set_idx]
    ps = tr.p_scaled[set_idx]
    big_r = t.num_phases(v)
    inner = [0] * (big_r + 1)
    for i, ph in zip(t.arrivals[v], t.phases()[v]):
        inner[ph] += xs[i - 1] * L - ps[i - 1]
    cum = 0
    best = 0
    for r in range(1, big_r + 1):
        size = t.snapshots[v][r].bit_count()
        cum += (L // size) * inner[r]
        if abs(cum) > best:
            best = abs(cum)
    scaled = Fraction(best, L * L)
    return scaled > Fraction(threshold), scaled


def detect_D(
    trace: MartingaleTrace, u: int, v: int, threshold
) -> tuple[bool, Fraction, Optional[tuple[int, int]]]:
    """Pair-drift check via prefix extrema.

    Over the monitored subsequence i in T(u) | T(v), the largest |window sum|
    of D_i(S_i) equals (max prefix - min prefix); flags strictly above
    `threshold` (nominally alpha*delta).  Returns the witnessing step window.
    """
    tr = trace
    idx = tr.family.pair_index(u, v)
    events = tr.pair_events[idx]
    L = tr.scale
    run = 0
    hi = lo = 0
    hi_at = lo_at = -1  # prefix positions; -1 is the empty prefix
    for k, (_, d) in enumerate(events):
        run += d
        if run > hi:
            hi, hi_at = run, k
        if run < lo:
            lo, lo_at = run, k
    value = Fraction(hi - lo, L)
    window: Optional[tuple[int, int]] = None
    if events and hi - lo > 0:
        a, b = min(hi_at, lo_at), max(hi_at, lo_at)
        window = (events[a + 1][0], events[b][0])
    return value > Fraction(threshold), value, window


# ---------------------------------------------------------------------------
# the three-term decomposition of |delta^r(v, S)|

@dataclass(frozen=True)
class DecompositionTerms:
    lhs: Fraction
    collision_term: Fraction
    drift_term: Fraction
    palette_error_term: Fraction

    @property
    def rhs(self) -> Fraction:
        return self.collision_term + self.drift_term + self.palette_error_term

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def _vertex_decomposition_rows(trace: MartingaleTrace, v: int) -> list[list[tuple[int, int, int, int]]]:
    """For every tracked set: per phase r = 1..R, (lhs, collision, drift,
    palette-error), all scaled by L^2.  One pass over the vertex's arrivals."""
    tr = trace
    t = tr.transcript
    if t is None:
        raise TrackingError("trace is not attached to a transcript")
    L = tr.scale
    g = tr.gamma_size
    z_list, colored_list, x_lists = tr._materialize()
    snaps = t.snapshots[v]
    big_r = len(snaps) - 1
    sizes = [snap.bit_count() for snap in snaps]
    las = [L // size for size in sizes]
    set_masks = [s.mask for s in tr.family.sets]
    ns = len(set_masks)
    # |A^{l-1}(v) & S| / |A^{l-1}(v)|, scaled by L, per phase and set
    prev_frac = [
        [(snaps[r - 1] & mask).bit_count() * las[r - 1] for mask in set_masks]
        for r in range(1, big_r + 1)
    ]
    z_sum = [0] * (big_r + 1)
    d_sum = [[0] * ns for _ in range(big_r + 1)]
    e_sum = [[0] * ns for _ in range(big_r + 1)]
    p_scaled = tr.p_scaled
    for i, ph in zip(t.arrivals[v], t.phases()[v]):
        k = i - 1
        z_sum[ph] += z_list[k]
        if colored_list[k]:
            dph = d_sum[ph]
            eph = e_sum[ph]
            pf = prev_frac[ph - 1]
            for s in range(ns):
                p = p_scaled[s][k]
                dph[s] += x_lists[s][k] * L - p
                eph[s] += abs(p - pf[s])
        # uncolored step: X = p = 0, contributing nothing to any term
    lg = L // g
    rows: list[list[tuple[int, int, int, int]]] = [[] for _ in range(ns)]
    z_cum = 0
    t2_cum = [0] * ns
    t3_cum = [0] * ns
    for r in range(1, big_r + 1):
        la = las[r]
        z_cum += z_sum[r]
        t1 = la * z_cum * L
        snap = snaps[r]
        for s in range(ns):
            t2_cum[s] += la * d_sum[r][s]
            t3_cum[s] += la * e_sum[r][s]
            lhs = abs((snap & set_masks[s]).bit_count() * la - set_masks[s].bit_count() * lg) * L
            rows[s].append((lhs, t1, abs(t2_cum[s]), t3_cum[s]))
    return rows


def decomposition_check(trace: MartingaleTrace, v: int, r: int, s: ColorSet | int) -> DecompositionTerms:
    """lhs = |delta^r(v,S)| and the three bounding terms, as exact rationals.

    The caller asserts lhs <= sum of terms; this inequality holds pathwise,
    so a violation indicates a bookkeeping bug.
    """
    set_idx = s if isinstance(s, int) else trace.family.set_index(s)
    t = trace.transcript
    if t is None:
        raise TrackingError("trace is not attached to a transcript")
    if not 0 <= set_idx < len(trace.family.sets):
        raise TrackingError(f"set index {set_idx} out of range")
    if not 1 <= r <= t.num_phases(v):
        raise TrackingError(f"vertex {v} did not complete phase {r}")
    lhs, t1, t2, t3 = _vertex_decomposition_rows(trace, v)[set_idx][r - 1]
    l2 = trace.scale * trace.scale
    return DecompositionTerms(
        Fraction(lhs, l2), Fraction(t1, l2), Fraction(t2, l2), Fraction(t3, l2)
    )


def check_all_decompositions(trace: MartingaleTrace) -> list[tuple[int, int, int]]:
    """Scan every (vertex, phase, tracked set); return violating triples (should be none)."""
    t = trace.transcript
    if t is None:
        raise TrackingError("trace is not attached to a transcript")
    bad = []
    for v in range(t.config.n):
        per_set = _vertex_decomposition_rows(trace, v)
        for set_idx, rows in enumerate(per_set):
            for r, (lhs, t1, t2, t3) in enumerate(rows, start=1):
                if lhs > t1 + t2 + t3:
                    bad.append((v, r, set_idx))
    return bad


# ---------------------------------------------------------------------------
# bad-event report

@dataclass
class BadEventReport:
    w_vertices: list[int]
    atypical: dict[int, list[int]]  # set index -> S-atypical vertices
    atypical_overflow: dict[int, bool]  # set index -> |B(S)| >= C
    drift_pairs: list[Edge]
    well_behaved: bool


def evaluate_bad_events(
    trace: MartingaleTrace,
    alpha: float,
    c_threshold: int,
    eps: Optional[float] = None,
) -> BadEventReport:
    """Evaluate the collision, atypicality, and pair-drift events over the
    tracked family; well-behaved means none fired."""
    t = trace.transcript
    if t is None:
        raise TrackingError("trace is not attached to a transcript")
    cfg = t.config
    eps = cfg.eps if eps is None else eps
    if eps <= 0:
        raise ConfigurationError("atypicality threshold alpha/eps needs eps > 0")
    w_thr = alpha * cfg.delta
    a_thr = alpha / eps
    w_vertices = [v for v in range(cfg.n) if detect_W(trace, v, w_thr)[0]]
    atypical: dict[int, list[int]] = {}
    overflow: dict[int, bool] = {}
    for s_idx in range(len(trace.family.sets)):
        bs = [v for v in range(cfg.n) if detect_atypical(trace, v, s_idx, a_thr)[0]]
        atypical[s_idx] = bs
        overflow[s_idx] = len(bs) >= c_threshold
    drift = [
        (u, v) for (u, v) in trace.family.pairs if detect_D(trace, u, v, w_thr)[0]
    ]
    well = not w_vertices and not any(overflow.values()) and not drift
    return BadEventReport(w_vertices, atypical, overflow, drift, well)
