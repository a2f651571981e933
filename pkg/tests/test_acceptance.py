"""Acceptance suite: one test per criterion, each printing a PASS line.

Pilot-calibrated fixtures (frozen before the suite):
  * dense desk-scale run (criterion 9): pilot failure rate 0.0 over 200
    trials of K_300 at master_seed 20260810 -> threshold 0.01.
  * random-order balance (criterion 10): pilot unbalanced fraction 0.0625
    over 2000 orderings of K_51 at master seed 4242 -> slack 0.125; the
    analytic bound exp(-1/2) ~ 0.6065 dominates either way.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np

from edgegame import (
    ColorerKind,
    GameConfig,
    PhaseKind,
    TrackedSetFamily,
    run_game,
    run_traced_game,
)
from edgegame import analysis, builders, instrument, oracle
from edgegame.harness import ExperimentConfig, derive_seed, run_trials
from edgegame.phase import is_balanced

DENSE_PILOT_FAILURE_RATE = 0.0
DENSE_FAILURE_THRESHOLD = DENSE_PILOT_FAILURE_RATE + 0.01
BALANCE_PILOT_UNBALANCED = 0.0625
BALANCE_PILOT_SLACK = 2 * BALANCE_PILOT_UNBALANCED

WORKERS = 8


def _report(num: int, text: str) -> None:
    print(f"PASS criterion {num}: {text}")


def test_criterion_01_distribution_equivalence():
    """All schedules up to 4 edges / 4 vertices / gamma <= 4: the random
    greedy and phase/palette colorers induce identical exact distributions."""
    classes = oracle.canonical_small_schedules(max_edges=4, max_vertices=4)
    combos = 0
    for sched in classes:
        deg: dict[int, int] = {}
        for u, v in sched:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        delta = max(deg.values())
        configs = [(PhaseKind.DENSE, 1), (PhaseKind.DENSE, delta)]
        if len(sched) >= 2:
            configs.append((PhaseKind.RANDOM_ORDER, 2))
        for gamma in (1, 2, 3, 4):
            for kind, b in configs:
                da = oracle.exact_outcome_distribution(
                    sched, ColorerKind.RANDOM_GREEDY, gamma, b, kind)
                dap = oracle.exact_outcome_distribution(
                    sched, ColorerKind.PHASE_PALETTE, gamma, b, kind)
                assert da == dap, f"distributions differ: {sched} gamma={gamma} b={b} {kind}"
                assert da.total() == 1
                combos += 1
    _report(1, f"exact equality of the two colorers on {combos} "
               f"(schedule, gamma, phase) combinations over {len(classes)} classes")


def test_criterion_02_gadget_failure_rate():
    """Monte Carlo center-edge failure rate on the delta=3, gamma=3 gadget
    within +-0.02 of the exact enumeration value 2/3."""
    exact = oracle.gadget_failure_probability(3, 3)
    assert exact == Fraction(2, 3)
    trials = 20_000
    sched = builders.gadget_tree(3)
    center_pos = len(sched.edges) - 1
    fails = 0
    for t in range(trials):
        cfg = GameConfig.with_palette_size(
            6, 3, 3, b=3, colorer_kind=ColorerKind.RANDOM_GREEDY,
            seed=derive_seed(101, "gadget", t))
        tr = run_game(sched, cfg)
        fails += tr.outcomes[center_pos].failed
    rate = fails / trials
    assert abs(rate - 2 / 3) <= 0.02
    _report(2, f"gadget failure rate {rate:.4f} within 0.02 of {float(exact):.4f} "
               f"({trials} trials)")


def test_criterion_03_pigeonhole_success():
    """First-fit and random greedy never fail with gamma = 2*delta - 1."""
    surfaces = [
        ("K_20", 20, 19, lambda seed: builders.random_order(
            builders.complete_graph(20).edges, seed=seed, m=190, delta=19)),
        ("gadget(10)", 20, 10, lambda seed: builders.gadget_tree(10, n=20)),
        ("adaptive(20,10)", 20, 10, lambda seed: builders.adaptive_min_intersection(20, 10)),
    ]
    trials_per_colorer = 500
    total = 0
    for name, n, delta, factory in surfaces:
        for colorer in (ColorerKind.FIRST_FIT, ColorerKind.RANDOM_GREEDY):
            for t in range(trials_per_colorer):
                seed = derive_seed(3, name, colorer.value, t)
                cfg = GameConfig.with_palette_size(
                    n, delta, 2 * delta - 1, colorer_kind=colorer, seed=seed)
                tr = run_game(factory(seed), cfg)
                assert tr.failures == [], f"{name}/{colorer.value} failed at trial {t}"
                ok, _ = is_balanced(tr)
                assert ok  # dense-counter transcripts stay balanced (criterion 4)
                total += 1
    _report(3, f"zero failures over {total} pigeonhole trials "
               f"(3 builders x 2 colorers x {trials_per_colorer})")


def test_criterion_04_dense_counter_always_balanced():
    """Every dense-counter transcript is balanced, across colorers, b, and
    schedule shapes (the criterion is also asserted inside other suites)."""
    rng = random.Random(40)
    checked = 0
    for _ in range(60):
        n = rng.randrange(4, 12)
        delta = rng.randrange(2, min(8, n))
        b = rng.randrange(1, delta + 1)
        colorer = rng.choice(list(ColorerKind))
        cfg = GameConfig(n=n, delta=delta, eps=rng.choice([0.25, 0.5, 0.75]),
                         b=b, colorer_kind=colorer, seed=rng.randrange(1 << 30))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        rng.shuffle(edges)
        picked, deg = [], [0] * n
        for u, v in edges:
            if deg[u] < delta and deg[v] < delta:
                picked.append((u, v))
                deg[u] += 1
                deg[v] += 1
        tr = run_game(builders.ObliviousSchedule(picked), cfg)
        ok, witness = is_balanced(tr)
        assert ok, f"dense transcript unbalanced: {witness}"
        checked += 1
    _report(4, f"balance verdict true on all {checked} dense-counter transcripts")


def test_criterion_05_decomposition_inequality():
    """|delta^r(v,S)| <= collision + drift + palette-error terms for every
    tracked (v, r, S), over 500 seeded K_60 runs (exact rational comparison)."""
    runs = 500
    triples = 0
    for t in range(runs):
        seed = derive_seed(5, "decomposition", t)
        cfg = GameConfig(n=60, delta=59, eps=0.3, b=10,
                         colorer_kind=ColorerKind.PHASE_PALETTE, seed=seed)
        fam = TrackedSetFamily.default_family(cfg.gamma_size, count=32,
                                              seed=derive_seed(seed, "family"))
        sched = builders.random_order(builders.complete_graph(60).edges,
                                      seed=derive_seed(seed, "order"), m=cfg.m, delta=59)
        tr = run_traced_game(sched, cfg, fam)
        violations = instrument.check_all_decompositions(tr.trace)
        assert violations == [], f"decomposition violated at run {t}: {violations[:3]}"
        triples += sum(tr.num_phases(v) for v in range(60)) * 32
    _report(5, f"decomposition inequality exact on {triples} (v, r, S) triples "
               f"across {runs} K_60 runs")


def test_criterion_06_epsilon_hat_dp_vs_paths():
    """DP value of the error recurrence <= path-enumeration bound on 200
    random small transcripts; DP invariant across two evaluation orders."""
    rng = random.Random(6)
    transcripts = 0
    bounds_checked = 0
    while transcripts < 200:
        n = rng.randrange(4, 9)
        delta = rng.randrange(2, 5)
        b = rng.randrange(1, min(3, delta) + 1)
        kind = rng.choice([PhaseKind.DENSE, PhaseKind.RANDOM_ORDER])
        cfg = GameConfig(n=n, delta=delta, eps=rng.choice([0.3, 0.5, 0.8]), b=b,
                         phase_kind=kind, colorer_kind=ColorerKind.RANDOM_GREEDY,
                         seed=rng.randrange(1 << 30))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        rng.shuffle(edges)
        picked, deg = [], [0] * n
        cap = rng.randrange(0, 13)
        for u, v in edges:
            if len(picked) == cap:
                break
            if deg[u] < delta and deg[v] < delta:
                picked.append((u, v))
                deg[u] += 1
                deg[v] += 1
        tr = run_game(builders.ObliviousSchedule(picked), cfg)
        zeta = rng.choice([1e-3, 0.01, 0.1])
        asc = analysis.epsilon_hat(tr, zeta, tie_break="ascending")
        desc = analysis.epsilon_hat(tr, zeta, tie_break="descending")
        for key, val in asc.values.items():
            assert abs(val - desc.values[key]) <= 1e-12
        for v in range(n):
            for r in range(1, cfg.b + 1):
                bound = analysis.path_bound(tr, v, r, zeta)
                assert asc.values[(v, r)] <= bound * (1 + 1e-12) + 1e-300
                bounds_checked += 1
        transcripts += 1
    _report(6, f"DP <= path bound at {bounds_checked} vertex-phase pairs over "
               f"{transcripts} transcripts; order-invariant to 1e-12")


def test_criterion_07_detector_oracles_agree():
    """Pair-drift prefix-extrema detector equals the quadratic window scan,
    and the atypicality detector equals direct recomputation, on 100 runs."""
    pairs = [(0, 1), (5, 9), (10, 20), (2, 3), (14, 28)]
    drift_checks = 0
    atypical_checks = 0
    for t in range(100):
        seed = derive_seed(7, "detectors", t)
        cfg = GameConfig(n=30, delta=15, eps=0.3, b=10,
                         colorer_kind=ColorerKind.PHASE_PALETTE, seed=seed)
        fam = TrackedSetFamily.default_family(cfg.gamma_size, count=6,
                                              seed=derive_seed(seed, "family"), pairs=pairs)
        sched = builders.random_regular(30, 15, seed=derive_seed(seed, "graph"))
        sched = builders.random_order(sched.edges, seed=derive_seed(seed, "order"),
                                      m=cfg.m, delta=15)
        tr = run_traced_game(sched, cfg, fam)
        thr = 0.1 * cfg.delta
        for u, v in pairs:
            dflag, dval, dwin = instrument.detect_D(tr.trace, u, v, thr)
            sval, _ = oracle.window_scan_drift(tr.trace, u, v)
            assert dval == sval
            assert dflag == (sval > Fraction(thr))
            drift_checks += 1
        a_thr = 0.1 / cfg.eps
        for v in range(cfg.n):
            for s_idx in range(len(fam.sets)):
                flag, val = instrument.detect_atypical(tr.trace, v, s_idx, a_thr)
                rflag, rval = oracle.recompute_atypical(tr.trace, v, s_idx, a_thr)
                assert flag == rflag and val == rval
                atypical_checks += 1
    _report(7, f"{drift_checks} drift and {atypical_checks} atypicality "
               f"detector results match their oracles exactly")


def test_criterion_08_freedman_sanity():
    """Empirical tails of a +-1 fair-coin sum stay below the Freedman bound
    (within 3 standard errors) at deviations 100, 200, 300."""
    trials = 10_000
    length = 10_000
    rng = np.random.default_rng(8)
    sums = 2 * rng.binomial(length, 0.5, size=trials) - length
    details = []
    for dev in (100, 200, 300):
        emp = float(np.mean(sums >= dev))
        bound = analysis.freedman_bound(1, length, dev)
        se = math.sqrt(max(emp * (1 - emp), 1e-12) / trials)
        assert emp <= bound + 3 * se, f"tail {emp} above bound {bound} at dev {dev}"
        details.append(f"dev={dev}: emp={emp:.4f} <= bound={bound:.4f}")
    _report(8, "; ".join(details))


def test_criterion_09_dense_desk_scale():
    """K_300 with eps=0.3 under random greedy: failure rate at most the
    pilot-calibrated threshold (pilot rate 0.0 -> threshold 0.01)."""
    exp = ExperimentConfig(
        n=300, delta=299, eps=0.3, b=10, phase_kind="dense", colorer="random_greedy",
        builder={"kind": "complete", "shuffle": True}, trials=200,
        master_seed=20260810, threads=WORKERS)
    _, report = run_trials(exp)
    rate = report["failure_rate"]
    assert rate <= DENSE_FAILURE_THRESHOLD
    _report(9, f"K_300 failure rate {rate} <= threshold {DENSE_FAILURE_THRESHOLD} "
               f"(pilot {DENSE_PILOT_FAILURE_RATE}, 200 trials)")


def test_criterion_10_random_order_balance_rate():
    """Unbalanced fraction of 2000 uniform orderings of K_51 under the
    global phase cut stays below the analytic bound exp(-delta/(20 b))."""
    trials = 2000
    edges = builders.complete_graph(51).edges
    cfg_proto = GameConfig.with_palette_size(
        51, 50, 99, b=5, phase_kind=PhaseKind.RANDOM_ORDER,
        colorer_kind=ColorerKind.FIRST_FIT)
    unbalanced = 0
    for t in range(trials):
        seed = derive_seed(4242, "ordering", t)
        sched = builders.random_order(edges, seed=seed, m=cfg_proto.m,
                                      scatter_nulls=True, delta=50)
        cfg = GameConfig.with_palette_size(
            51, 50, 99, b=5, phase_kind=PhaseKind.RANDOM_ORDER,
            colorer_kind=ColorerKind.FIRST_FIT, seed=seed)
        ok, _ = is_balanced(run_game(sched, cfg))
        unbalanced += not ok
    rate = unbalanced / trials
    bound = analysis.balance_failure_bound(50, 5)
    se = math.sqrt(max(rate * (1 - rate), 1e-12) / trials)
    limit = max(bound, BALANCE_PILOT_SLACK) + 3 * se
    assert rate <= limit, f"unbalanced rate {rate} above {limit}"
    _report(10, f"unbalanced fraction {rate:.4f} <= bound exp(-1/2)={bound:.4f} "
                f"(pilot {BALANCE_PILOT_UNBALANCED})")


def test_criterion_11_determinism_across_workers(tmp_path):
    """Byte-identical CSV/JSON from two 8-worker runs and one 1-worker run."""
    exp = ExperimentConfig(
        n=12, delta=11, eps=0.4, b=5, phase_kind="dense", colorer="phase_palette",
        builder={"kind": "complete", "shuffle": True}, trials=24, master_seed=77,
        tracked={"count": 6, "seed": 3, "pairs": [[0, 1], [2, 3]]})
    outputs = []
    for tag, threads in (("a", 8), ("b", 8), ("c", 1)):
        out = tmp_path / tag
        run_trials(exp, threads=threads, out_dir=str(out))
        outputs.append(((out / "trials.csv").read_bytes(),
                        (out / "trials.json").read_bytes()))
    assert outputs[0] == outputs[1] == outputs[2]
    _report(11, "8-worker, 8-worker, and 1-worker runs produced byte-identical output")
