"""Deterministic formula evaluation: technical parameters, the vertex-phase
error recurrence and its path-enumeration bound, and concentration-bound
calculators.

The parameter formulas produce astronomically small/large values for
realistic eps, so everything is evaluated in log space and exposed both as
(possibly underflowed/overflowed) floats and as log values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError, OracleCapError
from .game import Transcript
from .phase import arrival_phases


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class ParameterSet:
    """The analysis parameters for slack eps and density bound M (0 = random order).

    zeta is the error-control parameter, alpha the bad-event margin scale,
    b_paper the phase count, c_paper the atypical-vertex budget, and n_paper
    the degree/log(n) threshold for the random-order case.  log_* fields are
    always finite; the plain fields may underflow to 0.0 or overflow to inf.
    """

    eps: float
    density: float
    zeta: float
    alpha: float
    b_paper: float
    c_paper: float
    n_paper: float
    log_zeta: float
    log_alpha: float
    log_b: float
    log_c: float
    log_n: float


def _log_zeta(eps: float, density: float) -> float:
    if density == 0:
        return -20.0 / eps**2 + math.log(eps**3 / 10.0)
    return math.log(eps**5 / (100.0 * density)) - (5.0 * density / eps**2) ** 2


def parameter_set(eps: float, density: float, alpha_equals_zeta: bool = False) -> ParameterSet:
    """Evaluate the parameter formulas in the order zeta -> alpha -> b -> C (then N).

    `density` is M for the dense case (must be > 1) and 0 for the random-order
    case.  The definition of alpha is ambiguous in its source (alpha = zeta
    versus alpha = zeta*eps^3/5); the latter is the default, the former is
    available via alpha_equals_zeta.
    """
    if not 0 < eps < 1:
        raise ConfigurationError(f"eps must be in (0,1), got {eps}")
    if density != 0 and density <= 1:
        raise ConfigurationError(f"density must be 0 (random order) or > 1, got {density}")

    def derive(lz: float) -> tuple[float, float, float]:
        la = lz if alpha_equals_zeta else lz + math.log(eps**3 / 5.0)
        lb = math.log(40.0) - la - 2.0 * math.log(eps)
        lc = math.log(2000.0) - 4.0 * la
        return la, lb, lc

    lz = _log_zeta(eps, density)
    la, lb, lc = derive(lz)
    la0, lb0, lc0 = derive(_log_zeta(eps, 0))
    ln = max(math.log(400.0) + lc0, math.log(50.0) + lb0)
    return ParameterSet(
        eps=eps,
        density=density,
        zeta=_safe_exp(lz),
        alpha=_safe_exp(la),
        b_paper=_safe_exp(lb),
        c_paper=_safe_exp(lc),
        n_paper=_safe_exp(ln),
        log_zeta=lz,
        log_alpha=la,
        log_b=lb,
        log_c=lc,
        log_n=ln,
    )


# ---------------------------------------------------------------------------
# the error recurrence over vertex-phase pairs

@dataclass
class EpsilonHatTable:
    """DP values of the error recurrence: (vertex, phase) -> value."""

    values: dict[tuple[int, int], float]
    zeta: float
    b: int
    n: int

    def value(self, v: int, r: int) -> float:
        return self.values[(v, r)]


def _arrival_records(transcript: Transcript) -> list[list[tuple[int, int, int, int]]]:
    """Per vertex: (step, own phase, other endpoint, other's phase) in arrival order."""
    cfg = transcript.config
    phases = arrival_phases(transcript)
    phase_at: dict[tuple[int, int], int] = {}
    for v in range(cfg.n):
        for j, p in zip(transcript.arrivals[v], phases[v]):
            phase_at[(j, v)] = p
    records: list[list[tuple[int, int, int, int]]] = [[] for _ in range(cfg.n)]
    for v in range(cfg.n):
        for j, p in zip(transcript.arrivals[v], phases[v]):
            u, w = transcript.outcomes[j - 1].edge
            other = w if u == v else u
            records[v].append((j, p, other, phase_at[(j, other)]))
    return records


def epsilon_hat(
    transcript: Transcript, zeta: float, tie_break: str = "ascending"
) -> EpsilonHatTable:
    """Evaluate the error recurrence by dynamic programming.

    Pairs are processed in increasing order of the last incident arrival of
    phases <= r; every dependency (the opposite endpoint one phase back)
    closes strictly earlier in time, so any tie-break yields the same table.
    `tie_break` selects between two such orders ("ascending"/"descending")
    for the order-independence check.
    """
    cfg = transcript.config
    if cfg.eps <= 0:
        raise ConfigurationError("error recurrence needs eps > 0")
    coef = 5.0 / (cfg.delta * cfg.eps * cfg.eps)
    records = _arrival_records(transcript)
    b = cfg.b
    last_star: dict[tuple[int, int], int] = {}
    for v in range(cfg.n):
        last = [0] * (b + 1)
        for j, p, _, _ in records[v]:
            for r in range(p, b + 1):
                if j > last[r]:
                    last[r] = j
        for r in range(b + 1):
            last_star[(v, r)] = last[r]

    pairs = [(v, r) for v in range(cfg.n) for r in range(1, b + 1)]
    if tie_break == "ascending":
        pairs.sort(key=lambda vr: (last_star[vr], vr[0], vr[1]))
    elif tie_break == "descending":
        pairs.sort(key=lambda vr: (last_star[vr], -vr[0], -vr[1]))
    else:
        raise ConfigurationError(f"unknown tie_break {tie_break!r}")

    values: dict[tuple[int, int], float] = {(v, 0): 0.0 for v in range(cfg.n)}
    for v, r in pairs:
        acc = 0.0
        for _, p, other, other_phase in records[v]:
            if p <= r:
                acc += values[(other, other_phase - 1)]
        values[(v, r)] = zeta + coef * acc
    return EpsilonHatTable(values=values, zeta=zeta, b=b, n=cfg.n)


def is_error_controlled(
    table: EpsilonHatTable, eps: float
) -> tuple[bool, Optional[tuple[int, int]], float]:
    """True iff every entry is at most eps^3/10; also returns the worst offender."""
    limit = eps**3 / 10.0
    worst_pair: Optional[tuple[int, int]] = None
    worst = -math.inf
    for (v, r), val in table.values.items():
        if r >= 1 and val > worst:
            worst = val
            worst_pair = (v, r)
    return worst <= limit, worst_pair, worst


def path_bound(
    transcript: Transcript,
    v: int,
    r: int,
    zeta: float,
    max_edges: int = 12,
    max_paths: int = 10**6,
) -> float:
    """Upper bound on the recurrence value by explicit valid-path enumeration.

    Enumerates every path (including the empty one) whose k-th edge arrives
    in a strictly earlier phase of the shared vertex than the (k-1)-th, and
    sums zeta * (5/(delta*eps^2))^length.  Exponential; hard-capped.
    """
    cfg = transcript.config
    if cfg.eps <= 0:
        raise ConfigurationError("path bound needs eps > 0")
    edge_count = sum(1 for o in transcript.outcomes if o.edge is not None)
    if edge_count > max_edges:
        raise OracleCapError(f"{edge_count} edges exceed the {max_edges}-edge enumeration cap")
    weight = 5.0 / (cfg.delta * cfg.eps * cfg.eps)
    records = _arrival_records(transcript)
    paths = 0

    def visit(x: int, limit_phase: int) -> float:
        nonlocal paths
        paths += 1
        if paths > max_paths:
            raise OracleCapError(f"path count exceeds the {max_paths} cap")
        acc = 1.0
        for _, p, other, other_phase in records[x]:
            if p <= limit_phase:
                acc += weight * visit(other, other_phase - 1)
        return acc

    return zeta * visit(v, r)


# ---------------------------------------------------------------------------
# concentration-bound calculators

def freedman_bound(d: float, var_budget: float, deviation: float) -> float:
    """Freedman tail: exp(-deviation^2 / (2*(d*deviation/3 + var_budget))), capped at 1."""
    if d <= 0:
        raise ConfigurationError("difference bound d must be positive")
    if var_budget < 0 or deviation < 0:
        raise ConfigurationError("var_budget and deviation must be nonnegative")
    if deviation == 0:
        return 1.0
    return min(1.0, math.exp(-(deviation**2) / (2.0 * (d * deviation / 3.0 + var_budget))))


def derived_concentration_bound(c: float, alpha: float, delta: float, a: float) -> float:
    """Joint-deviation bound for c derived sequences: exp(-c*alpha^4*delta/(128*a))."""
    if a <= 0:
        raise ConfigurationError("per-step coefficient budget a must be positive")
    if c <= 0 or alpha <= 0 or delta <= 0:
        raise ConfigurationError("c, alpha, delta must be positive")
    return min(1.0, math.exp(-c * alpha**4 * delta / (128.0 * a)))


def hypergeometric_tail(m: int, d: int, k: int, t: float) -> float:
    """Upper-tail bound exp(-t^2 / (2*(mu + t/3))) with mu = k*d/m."""
    if m < 1 or not 0 <= d <= m or not 0 <= k <= m:
        raise ConfigurationError("need 0 <= d, k <= m with m >= 1")
    if t < 0:
        raise ConfigurationError("t must be nonnegative")
    if t == 0:
        return 1.0
    mu = k * d / m
    return min(1.0, math.exp(-(t**2) / (2.0 * (mu + t / 3.0))))


def balance_failure_bound(delta: int, b: int) -> float:
    """Fraction of orderings under which the global phase cut is unbalanced: exp(-delta/(20*b))."""
    if delta <= 0 or b <= 0:
        raise ConfigurationError("delta and b must be positive")
    return math.exp(-delta / (20.0 * b))
