"""The online edge-coloring game: configs, step semantics, and transcripts.

Three colorer strategies are implemented.  First-fit picks the lowest legal
color.  The random greedy colorer draws the final color uniformly from the
intersection of the endpoints' free sets.  The phase/palette variant first
draws a preliminary color from the intersection of the endpoints' palettes
(free-set snapshots frozen at phase boundaries); if the preliminary color is
no longer legal the step is a collision and the final color is resampled from
the free-set intersection.  For any fixed history the final color of the
phase/palette variant is uniform on the free-set intersection, so the two
random colorers induce identical distributions over colorings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Protocol, Sequence

from .colorset import ColorSet, sample_mask
from .errors import BuilderProtocolError, ConfigurationError
from .phase import PhaseCounter, PhaseKind

EdgeEvent = Optional[tuple[int, int]]


class ColorerKind(Enum):
    FIRST_FIT = "first_fit"
    RANDOM_GREEDY = "random_greedy"
    PHASE_PALETTE = "phase_palette"


def exact_palette_size(eps: float, delta: int) -> int:
    """ceil((1+eps)*delta) with eps read as an exact decimal, avoiding float ceil traps."""
    f = Fraction(str(eps)) + 1
    return -(-f.numerator * delta // f.denominator)


@dataclass(frozen=True)
class GameConfig:
    """Parameters of one game: n vertices, degree bound delta, slack eps.

    The palette universe size is ceil((1+eps)*delta) and the game lasts
    m = floor(delta*n/2) steps.  `gamma_size` is normally derived from eps;
    `with_palette_size` constructs a config from an explicit universe size
    (eps is then gamma/delta - 1 and may be 0, e.g. for gadget experiments
    at gamma = delta).
    """

    n: int
    delta: int
    eps: float
    b: Optional[int] = None
    phase_kind: PhaseKind = PhaseKind.DENSE
    colorer_kind: ColorerKind = ColorerKind.PHASE_PALETTE
    seed: int = 0
    gamma_size: Optional[int] = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError(f"need at least 2 vertices, got n={self.n}")
        if self.delta < 1:
            raise ConfigurationError(f"need delta >= 1, got {self.delta}")
        if self.gamma_size is None:
            if not 0 < self.eps < 1:
                raise ConfigurationError(f"eps must be in (0,1), got {self.eps}")
            object.__setattr__(self, "gamma_size", exact_palette_size(self.eps, self.delta))
        else:
            if not 1 <= self.gamma_size <= 2 * self.delta - 1:
                raise ConfigurationError(
                    f"explicit palette size must be in [1, 2*delta-1], got {self.gamma_size}"
                )
        b = self.b
        if b is None:
            cap = self.delta if self.phase_kind is PhaseKind.DENSE else self.m
            object.__setattr__(self, "b", min(10, cap))
        else:
            if b < 1:
                raise ConfigurationError(f"b must be >= 1, got {b}")
            if self.phase_kind is PhaseKind.DENSE and b > self.delta:
                raise ConfigurationError(f"dense phases need b <= delta, got b={b}")
            if self.phase_kind is PhaseKind.RANDOM_ORDER and b > self.m:
                raise ConfigurationError(f"random-order phases need b <= m, got b={b}")

    @classmethod
    def with_palette_size(cls, n: int, delta: int, gamma_size: int, **kwargs) -> "GameConfig":
        return cls(n=n, delta=delta, eps=gamma_size / delta - 1, gamma_size=gamma_size, **kwargs)

    @property
    def m(self) -> int:
        return self.delta * self.n // 2

    def gamma(self) -> ColorSet:
        return ColorSet.full(self.gamma_size)


@dataclass(slots=True)
class StepOutcome:
    """Record of one game step.

    `collision` means a preliminary color was drawn and was not legal;
    `failed` means a non-null edge ended up uncolored.  Whenever `final` is
    set it lay in the free-set intersection of the endpoints at draw time.
    """

    step: int
    edge: EdgeEvent
    preliminary: Optional[int]
    final: Optional[int]
    collision: bool
    failed: bool
    palette_intersection_size: int
    free_intersection_size: int


class StepRecorder(Protocol):
    def begin_step(self, state: "GameState", i: int, edge: EdgeEvent, aa: int, ff: int) -> None: ...

    def end_step(self, outcome: StepOutcome) -> None: ...


class GameState:
    """Live state of one game; single-threaded, one instance per run."""

    def __init__(self, config: GameConfig):
        self.config = config
        n = config.n
        full = (1 << config.gamma_size) - 1
        self.free: list[int] = [full] * n
        self.palette: list[int] = [full] * n
        # snapshots[v][r] is the free set of v at the end of its r-th phase;
        # index 0 is the full universe.
        self.snapshots: list[list[int]] = [[full] for _ in range(n)]
        self.degree = [0] * n
        self.colored_at = [0] * n
        self.edges: set[tuple[int, int]] = set()
        self.edge_colors: dict[tuple[int, int], Optional[int]] = {}
        self.counter = PhaseCounter(config.phase_kind, config.b, config.delta, config.m, n)
        self.step_index = 0
        self.colored_total = 0
        self.failed_steps: list[int] = []
        self.used_colors_mask = 0
        self._finalized = False

    @property
    def arrivals(self) -> list[list[int]]:
        return self.counter.arrivals

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def _validate_edge(self, edge: tuple[int, int]) -> tuple[int, int]:
        u, v = edge
        n = self.config.n
        if not (0 <= u < n and 0 <= v < n):
            raise BuilderProtocolError(f"vertex out of range in edge {edge}")
        if u == v:
            raise BuilderProtocolError(f"self-loop {edge}")
        if self.has_edge(u, v):
            raise BuilderProtocolError(f"repeated edge {edge}")
        d = self.config.delta
        if self.degree[u] > d - 1 or self.degree[v] > d - 1:
            raise BuilderProtocolError(f"degree bound {d} violated by edge {edge}")
        return u, v

    def step(self, edge: EdgeEvent, rng: random.Random, recorder: Optional[StepRecorder] = None) -> StepOutcome:
        if self._finalized:
            raise ConfigurationError("game already finalized")
        if self.step_index >= self.config.m:
            raise ConfigurationError("step budget m exhausted")
        i = self.step_index + 1

        if edge is None:
            # Null steps advance the counter; under the random-order
            # partition a phase boundary may fall here, refreshing palettes
            # to the (unchanged) free sets.
            moved = self.counter.advance(i, None)
            self._refresh(moved)
            outcome = StepOutcome(i, None, None, None, False, False, 0, 0)
            if recorder is not None:
                recorder.begin_step(self, i, None, 0, 0)
                recorder.end_step(outcome)
            self.step_index = i
            return outcome

        u, v = self._validate_edge(edge)
        moved = self.counter.advance(i, (u, v))
        self._refresh(moved)
        self.degree[u] += 1
        self.degree[v] += 1
        self.edges.add((min(u, v), max(u, v)))

        aa = self.palette[u] & self.palette[v]
        ff = self.free[u] & self.free[v]
        if recorder is not None:
            recorder.begin_step(self, i, (u, v), aa, ff)

        preliminary: Optional[int] = None
        final: Optional[int] = None
        collision = False
        kind = self.config.colorer_kind
        if kind is ColorerKind.PHASE_PALETTE:
            if aa:
                preliminary = sample_mask(aa, rng)
                if (ff >> preliminary) & 1:
                    final = preliminary
                else:
                    collision = True
                    if ff:
                        final = sample_mask(ff, rng)
        elif kind is ColorerKind.RANDOM_GREEDY:
            if ff:
                final = sample_mask(ff, rng)
        else:  # FIRST_FIT
            if ff:
                final = (ff & -ff).bit_length() - 1

        if final is not None:
            bit = 1 << final
            self.free[u] &= ~bit
            self.free[v] &= ~bit
            self.colored_at[u] += 1
            self.colored_at[v] += 1
            self.colored_total += 1
            self.used_colors_mask |= bit
        self.edge_colors[(min(u, v), max(u, v))] = final
        failed = final is None
        if failed:
            self.failed_steps.append(i)

        outcome = StepOutcome(
            i, (u, v), preliminary, final, collision, failed,
            aa.bit_count(), ff.bit_count(),
        )
        if recorder is not None:
            recorder.end_step(outcome)
        self.step_index = i
        return outcome

    def _refresh(self, moved: Sequence[int]) -> None:
        # A vertex entering phase p at this step completed phase p-1 at the
        # previous step; its palette becomes the current free set.  The
        # snapshot for phase 0 is pre-seeded, so the 0 -> 1 move records
        # nothing new (the free set is still the full universe then).
        for w in moved:
            p = self.counter.current_phase(w)
            if p >= 2:
                self.snapshots[w].append(self.free[w])
            self.palette[w] = self.free[w]

    def finalize(self) -> None:
        """Close the last phase of every vertex at game end (snapshot = current free set)."""
        if self._finalized:
            return
        for w in range(self.config.n):
            p = self.counter.current_phase(w)
            if p >= 1:
                self.snapshots[w].append(self.free[w])
        self._finalized = True


def new_game(config: GameConfig) -> GameState:
    """Fresh game: all free sets and palettes equal the full universe."""
    return GameState(config)


def step(state: GameState, edge: EdgeEvent, rng: random.Random,
         recorder: Optional[StepRecorder] = None) -> StepOutcome:
    return state.step(edge, rng, recorder)


def free_intersection(state: GameState, u: int, v: int) -> ColorSet:
    """F(u) & F(v) by value; the state is not modified."""
    n = state.config.n
    if not (0 <= u < n and 0 <= v < n):
        raise ConfigurationError(f"unknown vertex id in ({u}, {v})")
    if u == v:
        raise ConfigurationError("free_intersection needs distinct vertices")
    return ColorSet(state.free[u] & state.free[v], state.config.gamma_size)


class StateView:
    """Read-only view handed to adaptive builders: free sets and the colored
    graph are visible, the colorer's random stream is not."""

    __slots__ = ("_state",)

    def __init__(self, state: GameState):
        self._state = state

    @property
    def n(self) -> int:
        return self._state.config.n

    @property
    def gamma_size(self) -> int:
        return self._state.config.gamma_size

    @property
    def delta(self) -> int:
        return self._state.config.delta

    @property
    def step_index(self) -> int:
        return self._state.step_index

    def degree(self, v: int) -> int:
        return self._state.degree[v]

    def has_edge(self, u: int, v: int) -> bool:
        return self._state.has_edge(u, v)

    def edge_color(self, u: int, v: int) -> Optional[int]:
        """Final color of a present edge (None if it failed or was never added)."""
        return self._state.edge_colors.get((min(u, v), max(u, v)))

    def colored_edges(self) -> dict[tuple[int, int], Optional[int]]:
        return dict(self._state.edge_colors)

    def free_mask(self, v: int) -> int:
        return self._state.free[v]

    def free(self, v: int) -> ColorSet:
        return ColorSet(self._state.free[v], self._state.config.gamma_size)


class BuilderProtocol(Protocol):
    oblivious: bool

    def next_edge(self, view: StateView, i: int, rng: random.Random) -> EdgeEvent: ...


@dataclass
class Transcript:
    """Full per-step history of one game plus phase-boundary palette snapshots."""

    config: GameConfig
    outcomes: list[StepOutcome]
    arrivals: list[list[int]]
    snapshots: list[list[int]]
    seed: Optional[int] = None
    trace: Optional[object] = None
    builder_name: Optional[str] = None
    _phases: Optional[list[list[int]]] = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.outcomes)

    def phases(self) -> list[list[int]]:
        """Arrival-aligned phase indices under the run's own counter (cached)."""
        if self._phases is None:
            from .phase import arrival_phases

            self._phases = arrival_phases(self)
        return self._phases

    @property
    def failures(self) -> list[int]:
        return [o.step for o in self.outcomes if o.failed]

    @property
    def colored_total(self) -> int:
        return sum(1 for o in self.outcomes if o.final is not None)

    def colors_used(self) -> int:
        mask = 0
        for o in self.outcomes:
            if o.final is not None:
                mask |= 1 << o.final
        return mask.bit_count()

    def num_phases(self, v: int) -> int:
        """Number of completed phases of v (the last one closes at game end)."""
        return len(self.snapshots[v]) - 1

    def snapshot(self, v: int, r: int) -> ColorSet:
        if not 0 <= r <= self.num_phases(v):
            raise ConfigurationError(f"vertex {v} has no phase-{r} snapshot")
        return ColorSet(self.snapshots[v][r], self.config.gamma_size)

    def used_in_phase(self, v: int, r: int) -> ColorSet:
        """U^r(v): colors consumed at v during its r-th phase (snapshot difference)."""
        if not 1 <= r <= self.num_phases(v):
            raise ConfigurationError(f"vertex {v} has no phase-{r} snapshot")
        g = self.config.gamma_size
        return ColorSet(self.snapshots[v][r - 1] & ~self.snapshots[v][r], g)

    def last_arrival(self, v: int, r: int, phases: Optional[list[list[int]]] = None) -> Optional[int]:
        """last(r, v): the arrival time of the final edge of v-phase r, if any."""
        from .phase import arrival_phases

        ph = phases[v] if phases is not None else arrival_phases(self)[v]
        steps = [s for s, p in zip(self.arrivals[v], ph) if p == r]
        return max(steps) if steps else None

    def check_proper(self) -> None:
        """Assert no two colored edges sharing a vertex carry the same color."""
        seen = [0] * self.config.n
        for o in self.outcomes:
            if o.final is None:
                continue
            u, v = o.edge
            bit = 1 << o.final
            if seen[u] & bit or seen[v] & bit:
                raise AssertionError(f"improper coloring at step {o.step}")
            seen[u] |= bit
            seen[v] |= bit


def run_game(
    builder: BuilderProtocol,
    config: GameConfig,
    *,
    rng: Optional[random.Random] = None,
    builder_rng: Optional[random.Random] = None,
    recorder: Optional[StepRecorder] = None,
    builder_name: Optional[str] = None,
) -> Transcript:
    """Play the full m-step game; failures do not halt the run.

    The colorer stream defaults to Random(config.seed); builders get an
    independent derived stream so their draws never perturb color choices.
    """
    state = new_game(config)
    rng = rng if rng is not None else random.Random(config.seed)
    builder_rng = builder_rng if builder_rng is not None else random.Random(config.seed ^ 0x9E3779B97F4A7C15)
    view = StateView(state)
    outcomes: list[StepOutcome] = []
    for i in range(1, config.m + 1):
        edge = builder.next_edge(view, i, builder_rng)
        outcomes.append(state.step(edge, rng, recorder))
    state.finalize()
    return Transcript(
        config=config,
        outcomes=outcomes,
        arrivals=[list(a) for a in state.arrivals],
        snapshots=[list(s) for s in state.snapshots],
        seed=config.seed,
        builder_name=builder_name,
    )
