"""Experiment runner: seeded parallel trials, aggregation, and the built-in
verification suite.

Per-trial seeds are derived by hashing (master_seed, trial index), so results
are independent of worker count and scheduling; summaries are merged and
sorted by trial index before anything is written.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import analysis, builders, instrument, oracle
from .errors import BuilderProtocolError, ConfigurationError
from .game import ColorerKind, GameConfig, run_game
from .instrument import TrackedSetFamily, run_traced_game
from .phase import PhaseKind, is_balanced

CSV_HEADER = "trial,n,delta,eps,gamma,failed_edges,collisions,max_abs_delta,well_behaved,balanced,seed"


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit stream seed from a master seed and a label path."""
    text = "|".join([str(master), *map(str, parts)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """95% (by default) Wilson score interval for a binomial proportion."""
    if total == 0:
        return 0.0, 1.0
    phat = successes / total
    denom = 1.0 + z * z / total
    center = phat + z * z / (2 * total)
    radius = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total))
    return (center - radius) / denom, (center + radius) / denom


@dataclass
class ExperimentConfig:
    """One experiment: a game configuration, a builder spec, and trial count.

    builder spec keys: kind in {complete, gadget, random_regular, file,
    adaptive_min_intersection}; optional shuffle (random arrival order),
    scatter_nulls (defaults to true under random-order phases), degree
    (random_regular), path (file).
    """

    n: int
    delta: int
    eps: Optional[float] = None
    gamma_size: Optional[int] = None
    b: Optional[int] = None
    phase_kind: str = "dense"
    colorer: str = "phase_palette"
    builder: dict = field(default_factory=lambda: {"kind": "complete"})
    trials: int = 100
    master_seed: int = 0
    threads: int = 1
    tracked: Optional[dict] = None
    alpha: float = 0.1
    c_threshold: int = 8

    def __post_init__(self):
        if self.eps is None and self.gamma_size is None:
            raise ConfigurationError("specify eps or gamma_size")
        if self.trials < 0:
            raise ConfigurationError("trials must be >= 0")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def game_config(self, seed: int) -> GameConfig:
        kwargs = dict(
            b=self.b,
            phase_kind=PhaseKind(self.phase_kind),
            colorer_kind=ColorerKind(self.colorer),
            seed=seed,
        )
        if self.gamma_size is not None:
            return GameConfig.with_palette_size(self.n, self.delta, self.gamma_size, **kwargs)
        return GameConfig(self.n, self.delta, self.eps, **kwargs)

    def make_family(self) -> Optional[TrackedSetFamily]:
        if not self.tracked:
            return None
        cfg = self.game_config(0)
        pairs = [tuple(p) for p in self.tracked.get("pairs", [])]
        return TrackedSetFamily.default_family(
            cfg.gamma_size,
            count=self.tracked.get("count", 32),
            seed=self.tracked.get("seed", 0),
            pairs=pairs,
        )

    def make_builder(self, trial_seed: int):
        spec = self.builder
        kind = spec.get("kind", "complete")
        if kind == "adaptive_min_intersection":
            return builders.adaptive_min_intersection(self.n, self.delta)
        if kind == "complete":
            base = builders.complete_graph(self.n)
        elif kind == "gadget":
            base = builders.gadget_tree(self.delta, self.n)
        elif kind == "random_regular":
            base = builders.random_regular(
                self.n, spec.get("degree", self.delta), seed=derive_seed(trial_seed, "graph")
            )
        elif kind == "file":
            n, edges = builders.load_edge_list(spec["path"])
            if n != self.n:
                raise ConfigurationError(f"graph file has n={n}, experiment has n={self.n}")
            base = builders.ObliviousSchedule(edges, name=spec["path"])
        else:
            raise ConfigurationError(f"unknown builder kind {kind!r}")
        if spec.get("shuffle", False):
            scatter = spec.get("scatter_nulls")
            if scatter is None:
                scatter = self.phase_kind == "random_order"
            m = self.delta * self.n // 2
            return builders.random_order(
                base.edges, seed=derive_seed(trial_seed, "order"), m=m,
                scatter_nulls=scatter, delta=self.delta,
            )
        return base


@dataclass
class TrialSummary:
    trial: int
    seed: int
    failed_edges: int  # -1 when the builder broke protocol and the run aborted
    collisions: int
    max_abs_delta: Optional[float]
    well_behaved: Optional[bool]
    balanced: bool
    colors_used: int
    runtime: float
    error: Optional[str] = None

    @property
    def won(self) -> bool:
        return self.failed_edges == 0


def run_single_trial(exp: ExperimentConfig, trial: int) -> TrialSummary:
    t0 = time.perf_counter()
    seed = derive_seed(exp.master_seed, "trial", trial)
    cfg = exp.game_config(seed)
    builder = exp.make_builder(seed)
    family = exp.make_family()
    try:
        if family is not None:
            transcript = run_traced_game(builder, cfg, family)
            trace = transcript.trace
            collisions = trace.collision_count()
            mad = float(instrument.max_abs_delta(transcript, family))
            well: Optional[bool] = None
            if cfg.eps > 0:
                report = instrument.evaluate_bad_events(trace, exp.alpha, exp.c_threshold)
                well = report.well_behaved
        else:
            transcript = run_game(builder, cfg)
            collisions = sum(1 for o in transcript.outcomes if o.collision and o.final is not None)
            mad = None
            well = None
    except BuilderProtocolError as exc:
        # an illegal builder aborts this trial only, never the sweep
        return TrialSummary(
            trial=trial, seed=seed, failed_edges=-1, collisions=0,
            max_abs_delta=None, well_behaved=None, balanced=False,
            colors_used=0, runtime=time.perf_counter() - t0, error=str(exc),
        )
    balanced, _ = is_balanced(transcript)
    return TrialSummary(
        trial=trial,
        seed=seed,
        failed_edges=len(transcript.failures),
        collisions=collisions,
        max_abs_delta=mad,
        well_behaved=well,
        balanced=balanced,
        colors_used=transcript.colors_used(),
        runtime=time.perf_counter() - t0,
    )


def _trial_worker(payload: tuple[dict, int]) -> TrialSummary:
    exp_dict, trial = payload
    return run_single_trial(ExperimentConfig.from_dict(exp_dict), trial)


def aggregate_report(summaries: list[TrialSummary]) -> dict:
    """Order-insensitive aggregate with a fixed key set.

    Failure statistics cover clean trials only; trials aborted by a
    builder-protocol violation are counted under builder_errors.
    """
    clean = [s for s in summaries if s.error is None]
    total = len(clean)
    losses = sum(1 for s in clean if s.failed_edges > 0)
    lo, hi = wilson_interval(losses, total) if total else (None, None)
    mads = [s.max_abs_delta for s in clean if s.max_abs_delta is not None]
    wells = [s.well_behaved for s in clean if s.well_behaved is not None]
    return {
        "trials": len(summaries),
        "builder_errors": len(summaries) - total,
        "wins": total - losses,
        "failure_rate": losses / total if total else None,
        "failure_wilson95": [lo, hi],
        "collisions_mean": sum(s.collisions for s in clean) / total if total else None,
        "collisions_max": max((s.collisions for s in clean), default=None),
        "max_abs_delta": max(mads) if mads else None,
        "well_behaved_rate": sum(wells) / len(wells) if wells else None,
        "balanced_rate": sum(s.balanced for s in clean) / total if total else None,
    }


def _csv_rows(exp: ExperimentConfig, summaries: list[TrialSummary]) -> list[str]:
    cfg = exp.game_config(0)
    rows = [CSV_HEADER]
    for s in summaries:
        mad = "" if s.max_abs_delta is None else repr(s.max_abs_delta)
        well = "" if s.well_behaved is None else str(int(s.well_behaved))
        rows.append(
            f"{s.trial},{cfg.n},{cfg.delta},{cfg.eps!r},{cfg.gamma_size},"
            f"{s.failed_edges},{s.collisions},{mad},{well},{int(s.balanced)},{s.seed}"
        )
    return rows


def run_trials(
    exp: ExperimentConfig,
    threads: Optional[int] = None,
    out_dir: Optional[str] = None,
    tag: str = "trials",
) -> tuple[list[TrialSummary], dict]:
    """Run `exp.trials` independent games; identical (config, master_seed)
    gives byte-identical outputs regardless of worker count."""
    threads = exp.threads if threads is None else threads
    payloads = [(exp.to_dict(), t) for t in range(exp.trials)]
    if threads <= 1 or exp.trials <= 1:
        summaries = [run_single_trial(exp, t) for t in range((exp.trials))]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(_trial_worker, payloads, chunksize=max(1, exp.trials // (threads * 4))))
    summaries.sort(key=lambda s: s.trial)
    report = aggregate_report(summaries)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{tag}.csv"), "w") as fh:
            fh.write("\n".join(_csv_rows(exp, summaries)) + "\n")
        with open(os.path.join(out_dir, f"{tag}.json"), "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return summaries, report


def sweep(
    exp: ExperimentConfig,
    grid_kind: str,
    values: list,
    threads: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> dict:
    """Run run_trials once per grid point (eps or gamma), with derived seeds."""
    if grid_kind not in ("eps", "gamma"):
        raise ConfigurationError("grid_kind must be 'eps' or 'gamma'")
    if not values:
        raise ConfigurationError("sweep needs a nonempty grid")
    points = []
    for k, value in enumerate(values):
        data = exp.to_dict()
        if grid_kind == "eps":
            data["eps"] = float(value)
            data["gamma_size"] = None
        else:
            data["gamma_size"] = int(value)
            data["eps"] = None
        data["master_seed"] = derive_seed(exp.master_seed, "sweep", grid_kind, k)
        sub = ExperimentConfig.from_dict(data)
        _, report = run_trials(sub, threads=threads, out_dir=out_dir, tag=f"sweep_{grid_kind}_{k}")
        points.append({"value": value, "report": report})
    result = {"grid": grid_kind, "points": points}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.json"), "w") as fh:
            json.dump(result, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return result


# ---------------------------------------------------------------------------
# verification suite

def _check_distribution_equivalence(full: bool) -> tuple[bool, str]:
    max_edges = 4 if full else 3
    gammas = range(1, 5) if full else range(1, 4)
    schedules = oracle.canonical_small_schedules(max_edges=max_edges, max_vertices=4)
    count = 0
    for sched in schedules:
        deg: dict[int, int] = {}
        for u, v in sched:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        delta = max(deg.values())
        m = len(sched)
        configs = [(PhaseKind.DENSE, 1), (PhaseKind.DENSE, delta)]
        if full and m >= 2:
            configs.append((PhaseKind.RANDOM_ORDER, 2))
        for gamma in gammas:
            for kind, b in configs:
                da = oracle.exact_outcome_distribution(
                    sched, ColorerKind.RANDOM_GREEDY, gamma, b, kind)
                dap = oracle.exact_outcome_distribution(
                    sched, ColorerKind.PHASE_PALETTE, gamma, b, kind)
                count += 1
                if da != dap:
                    return False, f"distributions differ on {sched} gamma={gamma} b={b} {kind}"
    return True, f"{count} schedule/palette/phase combinations"


def _check_engine_bridge(full: bool) -> tuple[bool, str]:
    max_edges = 3
    schedules = [s for s in oracle.canonical_small_schedules(max_edges=max_edges, max_vertices=4)
                 if len(s) <= max_edges]
    gammas = (2, 3) if not full else (1, 2, 3)
    count = 0
    for sched in schedules:
        deg: dict[int, int] = {}
        for u, v in sched:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        delta = max(deg.values())
        # b=1 keeps palettes frozen at the universe; b=delta refreshes them
        # at every arrival, so both refresh paths are exercised
        for b in (1, delta):
            for gamma in gammas:
                for colorer in (ColorerKind.RANDOM_GREEDY, ColorerKind.PHASE_PALETTE):
                    # comparing augmented outcomes (preliminary, final) makes
                    # palette bookkeeping bugs visible; the resample step
                    # makes final colors palette-independent
                    augmented = colorer is ColorerKind.PHASE_PALETTE
                    engine_dist, slots, cfg = oracle.engine_outcome_distribution(
                        sched, colorer, gamma, b=b, phase_kind=PhaseKind.DENSE,
                        include_preliminary=augmented)
                    ref = oracle.exact_outcome_distribution(
                        slots, colorer, gamma, b=b, phase_kind=PhaseKind.DENSE,
                        delta=cfg.delta, include_preliminary=augmented)
                    count += 1
                    if engine_dist != ref:
                        return False, f"engine deviates from oracle on {sched} gamma={gamma} b={b} {colorer}"
    return True, f"{count} engine-vs-oracle distributions"


def _check_gadget(full: bool) -> tuple[bool, str]:
    top = 6 if full else 4
    checked = 0
    for delta in range(2, top + 1):
        for gamma in range(delta, min(2 * delta, 13)):
            oracle.gadget_failure_probability(delta, gamma)  # internal closed-form assert
            checked += 1
    expect = [
        (3, 3, Fraction(2, 3)),
        (2, 2, Fraction(1, 2)),
        (3, 5, Fraction(0)),
    ]
    for delta, gamma, want in expect:
        got = oracle.gadget_failure_probability(delta, gamma)
        if got != want:
            return False, f"gadget({delta},{gamma}) = {got}, expected {want}"
    return True, f"{checked} gadget parameterizations"


def _seeded_traced_run(n: int, delta: int, eps: float, seed: int, kind: PhaseKind,
                       pairs: Optional[list] = None, count: int = 8):
    cfg = GameConfig(n=n, delta=delta, eps=eps, phase_kind=kind,
                     colorer_kind=ColorerKind.PHASE_PALETTE, seed=seed,
                     b=min(5, delta))
    family = TrackedSetFamily.default_family(
        cfg.gamma_size, count=count, seed=seed, pairs=pairs or [(0, 1), (1, 2)])
    sched = builders.random_order(
        builders.complete_graph(n).edges, seed=seed + 1, m=cfg.m,
        scatter_nulls=kind is PhaseKind.RANDOM_ORDER, delta=delta)
    return run_traced_game(sched, cfg, family), family


def _check_delta_recomputation() -> tuple[bool, str]:
    transcript, family = _seeded_traced_run(8, 7, 0.4, seed=11, kind=PhaseKind.DENSE)
    checked = 0
    for v in range(transcript.config.n):
        for r in range(transcript.num_phases(v) + 1):
            for s in family.sets:
                a = instrument.delta(transcript, v, r, s)
                b = oracle.brute_force_delta(transcript, v, r, s)
                checked += 1
                if a != b:
                    return False, f"delta mismatch at v={v} r={r}"
    return True, f"{checked} (v, r, S) triples"


def _check_path_bound(full: bool) -> tuple[bool, str]:
    import random as _random

    trials = 40 if full else 10
    rng = _random.Random(2024)
    checked = 0
    for _ in range(trials):
        n = rng.randrange(4, 8)
        delta = rng.randrange(2, 4)
        all_edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        rng.shuffle(all_edges)
        picked: list[tuple[int, int]] = []
        deg = [0] * n
        for u, v in all_edges:
            if len(picked) == 8:
                break
            if deg[u] < delta and deg[v] < delta:
                picked.append((u, v))
                deg[u] += 1
                deg[v] += 1
        kind = PhaseKind.DENSE if rng.random() < 0.5 else PhaseKind.RANDOM_ORDER
        cfg = GameConfig(n=n, delta=delta, eps=0.5, phase_kind=kind, b=min(2, delta),
                         colorer_kind=ColorerKind.RANDOM_GREEDY, seed=rng.randrange(1 << 30))
        transcript = run_game(builders.ObliviousSchedule(picked), cfg)
        zeta = 0.01
        asc = analysis.epsilon_hat(transcript, zeta, tie_break="ascending")
        desc = analysis.epsilon_hat(transcript, zeta, tie_break="descending")
        for key, val in asc.values.items():
            if abs(val - desc.values[key]) > 1e-12:
                return False, f"order dependence at {key}"
        for v in range(n):
            for r in range(1, cfg.b + 1):
                bound = analysis.path_bound(transcript, v, r, zeta)
                checked += 1
                if asc.values[(v, r)] > bound * (1 + 1e-12) + 1e-15:
                    return False, f"path bound violated at ({v},{r})"
    return True, f"{checked} vertex-phase bounds"


def _check_drift_and_atypical() -> tuple[bool, str]:
    checked = 0
    for seed in (3, 5):
        transcript, family = _seeded_traced_run(
            10, 9, 0.4, seed=seed, kind=PhaseKind.RANDOM_ORDER, pairs=[(0, 1), (2, 5), (3, 4)])
        trace = transcript.trace
        thr = 0.1 * transcript.config.delta
        for u, v in family.pairs:
            _, value, _ = instrument.detect_D(trace, u, v, thr)
            ref, _ = oracle.window_scan_drift(trace, u, v)
            checked += 1
            if value != ref:
                return False, f"drift value mismatch on pair ({u},{v})"
        a_thr = 0.1 / transcript.config.eps
        for v in range(transcript.config.n):
            for s_idx in range(len(family.sets)):
                flag, val = instrument.detect_atypical(trace, v, s_idx, a_thr)
                rflag, rval = oracle.recompute_atypical(trace, v, s_idx, a_thr)
                checked += 1
                if flag != rflag or val != rval:
                    return False, f"atypicality mismatch at v={v} set={s_idx}"
    return True, f"{checked} detector comparisons"


def _check_run_invariants() -> tuple[bool, str]:
    transcript, family = _seeded_traced_run(9, 8, 0.5, seed=17, kind=PhaseKind.DENSE)
    trace = transcript.trace
    cfg = transcript.config
    transcript.check_proper()
    # free-set size identity and palette nesting are checked through snapshots
    for v in range(cfg.n):
        snaps = transcript.snapshots[v]
        for r in range(1, len(snaps)):
            if snaps[r] & ~snaps[r - 1]:
                return False, f"palette snapshots not nested at v={v}"
    for i in range(1, transcript.m + 1):
        for s_idx in range(len(family.sets)):
            if abs(trace.x(i, s_idx) - trace.y(i, s_idx)) > trace.z(i):
                return False, f"|X-Y| > Z at step {i}"
    bad = instrument.check_all_decompositions(trace)
    if bad:
        return False, f"decomposition violated at {bad[0]}"
    return True, "proper coloring, nesting, |X-Y|<=Z, decomposition"


def verify(level: str = "quick", echo: Callable[[str], None] = print) -> bool:
    """Run the oracle suite and the per-run invariant assertions.

    Prints one PASS/FAIL line per item; returns overall success.
    """
    if level not in ("quick", "full"):
        raise ConfigurationError("level must be 'quick' or 'full'")
    full = level == "full"
    checks = [
        ("distribution-equivalence", lambda: _check_distribution_equivalence(full)),
        ("engine-vs-oracle", lambda: _check_engine_bridge(full)),
        ("gadget-closed-form", lambda: _check_gadget(full)),
        ("delta-recomputation", _check_delta_recomputation),
        ("path-bound-vs-dp", lambda: _check_path_bound(full)),
        ("drift-window-scan", _check_drift_and_atypical),
        ("run-invariants", _check_run_invariants),
    ]
    ok = True
    for name, fn in checks:
        passed, detail = fn()
        ok = ok and passed
        echo(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return ok


# ---------------------------------------------------------------------------
# plotting

def write_report(input_path: str, out_dir: str) -> list[str]:
    """Render static plots from a trials CSV or a sweep JSON."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    if input_path.endswith(".json"):
        with open(input_path) as fh:
            data = json.load(fh)
        xs = [p["value"] for p in data["points"]]
        ys = [p["report"]["failure_rate"] for p in data["points"]]
        los = [p["report"]["failure_wilson95"][0] for p in data["points"]]
        his = [p["report"]["failure_wilson95"][1] for p in data["points"]]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(xs, ys, "o-", label="failure rate")
        ax.fill_between(xs, los, his, alpha=0.25, label="Wilson 95%")
        ax.set_xlabel(data["grid"])
        ax.set_ylabel("failure rate")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, "failure_curve.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    else:
        rows = []
        with open(input_path) as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                rows.append(dict(zip(header, line.strip().split(","))))
        collisions = [int(r["collisions"]) for r in rows]
        failed = [int(r["failed_edges"]) for r in rows]
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        axes[0].hist(collisions, bins=20)
        axes[0].set_title("collisions per trial")
        axes[1].hist(failed, bins=20)
        axes[1].set_title("failed edges per trial")
        fig.tight_layout()
        path = os.path.join(out_dir, "trials_hist.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
