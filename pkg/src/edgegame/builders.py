"""Builder (adversary) strategies: oblivious schedules, random-order arrival,
fixed gadgets, graph generators, and an adaptive attacker.

Oblivious strategies are fully described by an edge list and a slot map; they
never look at the coloring.  The adaptive attacker inspects free sets through
the read-only state view.
"""

from __future__ import annotations

import random
from typing import Optional, Sequence

import networkx as nx

from .errors import ConfigurationError
from .game import EdgeEvent, StateView

Edge = tuple[int, int]


def _norm(edge: Sequence[int]) -> Edge:
    u, v = edge
    if u == v:
        raise ConfigurationError(f"self-loop {tuple(edge)}")
    return (min(u, v), max(u, v))


def _check_degrees(edges: Sequence[Edge], delta: Optional[int]) -> None:
    if delta is None:
        return
    deg: dict[int, int] = {}
    for u, v in edges:
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
        if deg[u] > delta or deg[v] > delta:
            raise ConfigurationError(f"edge list exceeds degree bound {delta}")


class ObliviousSchedule:
    """Plays a fixed slot list (None entries are null edges), padding with
    nulls once the slots run out."""

    oblivious = True

    def __init__(self, slots: Sequence[EdgeEvent], name: str = "oblivious"):
        seen: set[Edge] = set()
        cleaned: list[EdgeEvent] = []
        for e in slots:
            if e is None:
                cleaned.append(None)
                continue
            ne = _norm(e)
            if ne in seen:
                raise ConfigurationError(f"duplicate edge {ne} in schedule")
            seen.add(ne)
            cleaned.append(ne)
        self.slots = cleaned
        self.name = name

    @property
    def edges(self) -> list[Edge]:
        return [e for e in self.slots if e is not None]

    def next_edge(self, view: StateView, i: int, rng: random.Random) -> EdgeEvent:
        return self.slots[i - 1] if i <= len(self.slots) else None


def oblivious_from(
    edges: Sequence[Edge],
    positions: Sequence[int],
    m: int,
    delta: Optional[int] = None,
) -> ObliviousSchedule:
    """obl(G, sigma): edges[k] is played at 1-based slot positions[k], null elsewhere."""
    if len(edges) != len(positions):
        raise ConfigurationError("edges and positions must have equal length")
    slots: list[EdgeEvent] = [None] * m
    for e, pos in zip(edges, positions):
        if not 1 <= pos <= m:
            raise ConfigurationError(f"position {pos} outside [1, {m}]")
        if slots[pos - 1] is not None:
            raise ConfigurationError(f"two edges mapped to slot {pos}")
        slots[pos - 1] = _norm(e)
    sched = ObliviousSchedule(slots)
    _check_degrees(sched.edges, delta)
    return sched


def random_order(
    edges: Sequence[Edge],
    seed: int,
    m: int,
    scatter_nulls: bool = False,
    delta: Optional[int] = None,
) -> ObliviousSchedule:
    """Uniform random arrival order for a fixed edge set.

    With scatter_nulls the edges are placed by a uniform injection into the m
    slots (null gaps included), which is the right model when phases are cut
    by global step counts.  Without it the shuffled edges fill slots 1..|E|
    contiguously.
    """
    edges = [_norm(e) for e in edges]
    if len(set(edges)) != len(edges):
        raise ConfigurationError("duplicate edge in edge list")
    if len(edges) > m:
        raise ConfigurationError(f"{len(edges)} edges do not fit {m} slots")
    _check_degrees(edges, delta)
    rng = random.Random(seed)
    order = list(edges)
    rng.shuffle(order)
    if scatter_nulls:
        chosen = sorted(rng.sample(range(m), len(order)))
        slots: list[EdgeEvent] = [None] * m
        for slot, e in zip(chosen, order):
            slots[slot] = e
        return ObliviousSchedule(slots, name="random_order")
    return ObliviousSchedule(order, name="random_order")


def gadget_tree(delta: int, n: Optional[int] = None) -> ObliviousSchedule:
    """Two degree-(delta-1) stars at u and v, then the center edge (u, v).

    The final edge is the interesting one: each endpoint already carries
    delta-1 colors, so with a tight palette the free intersection is often
    empty.  Needs n >= 2*delta vertices.
    """
    if delta < 2:
        raise ConfigurationError("gadget needs delta >= 2")
    if n is None:
        n = 2 * delta
    if n < 2 * delta:
        raise ConfigurationError(f"gadget needs n >= 2*delta = {2 * delta}, got {n}")
    u, v = 0, 1
    edges: list[Edge] = []
    leaves_u = range(2, delta + 1)
    leaves_v = range(delta + 1, 2 * delta)
    edges.extend((u, w) for w in leaves_u)
    edges.extend((v, w) for w in leaves_v)
    edges.append((u, v))
    return ObliviousSchedule(edges, name=f"gadget(delta={delta})")


def complete_graph(n: int) -> ObliviousSchedule:
    """K_n edges in lexicographic order (wrap with random_order to shuffle)."""
    if n < 2:
        raise ConfigurationError("complete graph needs n >= 2")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return ObliviousSchedule(edges, name=f"K_{n}")


def random_regular(n: int, degree: int, seed: int) -> ObliviousSchedule:
    """A uniform-model random degree-regular simple graph (via networkx)."""
    if n * degree % 2 != 0 or not 0 <= degree < n:
        raise ConfigurationError(f"no {degree}-regular graph on {n} vertices")
    g = nx.random_regular_graph(degree, n, seed=seed)
    edges = sorted(_norm(e) for e in g.edges())
    return ObliviousSchedule(edges, name=f"random_regular({n},{degree})")


class AdaptiveMinIntersection:
    """Adaptive attacker: always plays a legal non-edge minimizing |F(u) & F(v)|,
    breaking ties by smallest (u, v); null once no legal pair remains."""

    oblivious = False
    name = "adaptive_min_intersection"

    def __init__(self, n: int, delta: int):
        if n < 2 or delta < 1:
            raise ConfigurationError("adaptive builder needs n >= 2 and delta >= 1")
        self.n = n
        self.delta = delta

    def next_edge(self, view: StateView, i: int, rng: random.Random) -> EdgeEvent:
        best: Optional[Edge] = None
        best_score = -1
        cap = self.delta - 1
        for u in range(self.n):
            if view.degree(u) > cap:
                continue
            fu = view.free_mask(u)
            for v in range(u + 1, self.n):
                if view.degree(v) > cap or view.has_edge(u, v):
                    continue
                score = (fu & view.free_mask(v)).bit_count()
                if best is None or score < best_score:
                    best = (u, v)
                    best_score = score
                    if score == 0:
                        return best
        return best


def adaptive_min_intersection(n: int, delta: int) -> AdaptiveMinIntersection:
    return AdaptiveMinIntersection(n, delta)


def load_edge_list(path: str) -> tuple[int, list[Edge]]:
    """Read the text edge-list format: header line `n m`, then one `u v` per line."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ConfigurationError(f"empty edge-list file {path}")
    header = lines[0].split()
    if len(header) != 2:
        raise ConfigurationError("edge-list header must be `n m`")
    n, m = int(header[0]), int(header[1])
    edges: list[Edge] = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ConfigurationError(f"bad edge line: {ln!r}")
        u, v = int(parts[0]), int(parts[1])
        if not (0 <= u < n and 0 <= v < n):
            raise ConfigurationError(f"vertex id out of range in line {ln!r}")
        edges.append(_norm((u, v)))
    if len(edges) != m:
        raise ConfigurationError(f"header declares {m} edges, file has {len(edges)}")
    return n, edges


def save_edge_list(path: str, n: int, edges: Sequence[Edge]) -> None:
    with open(path, "w") as fh:
        fh.write(f"{n} {len(edges)}\n")
        for u, v in edges:
            fh.write(f"{u} {v}\n")
