from __future__ import annotations

import math
import random

import pytest

from edgegame import ColorerKind, GameConfig, PhaseKind, run_game
from edgegame.analysis import (
    balance_failure_bound,
    derived_concentration_bound,
    epsilon_hat,
    freedman_bound,
    hypergeometric_tail,
    is_error_controlled,
    parameter_set,
    path_bound,
)
from edgegame.builders import ObliviousSchedule, complete_graph, random_order
from edgegame.errors import ConfigurationError, OracleCapError
from edgegame.oracle import exact_hypergeometric_tail


# --- technical parameters ----------------------------------------------------

def test_zeta_random_order_example():
    ps = parameter_set(0.5, 0)
    assert math.isclose(ps.zeta, math.exp(-80) * 0.0125, rel_tol=1e-12)


def test_zeta_dense_formula():
    ps = parameter_set(0.9, 2.0)
    want = (0.9**5 / 200.0) * math.exp(-((5 * 2.0 / 0.81) ** 2))
    assert math.isclose(ps.zeta, want, rel_tol=1e-9)


def test_parameter_chain_relations_where_finite():
    ps = parameter_set(0.9, 0)
    assert math.isclose(ps.alpha, ps.zeta * 0.9**3 / 5, rel_tol=1e-9)
    assert math.isclose(ps.b_paper, 40 / (ps.alpha * 0.9**2), rel_tol=1e-9)
    assert math.isclose(ps.c_paper, 2000 / ps.alpha**4, rel_tol=1e-9)


def test_n_is_max_over_random_order_terms():
    for eps in (0.3, 0.5, 0.9):
        ps0 = parameter_set(eps, 0)
        # compare in log space; the plain floats overflow for small eps
        want = max(math.log(400) + ps0.log_c, math.log(50) + ps0.log_b)
        assert math.isclose(ps0.log_n, want, rel_tol=1e-12)
        assert ps0.log_n >= math.log(400) + ps0.log_c - 1e-9
        ps_dense = parameter_set(eps, 2.0)
        assert ps_dense.log_n == ps0.log_n  # N depends on the random-order parameters only


def test_density_domain_errors():
    with pytest.raises(ConfigurationError):
        parameter_set(0.5, 0.5)
    with pytest.raises(ConfigurationError):
        parameter_set(1.5, 0)


def test_alpha_equals_zeta_variant():
    ps = parameter_set(0.5, 0, alpha_equals_zeta=True)
    assert ps.alpha == ps.zeta


def test_extreme_eps_overflows_to_inf_not_error():
    ps = parameter_set(0.1, 0)
    assert ps.zeta == 0.0  # underflow
    assert ps.c_paper == math.inf
    assert math.isfinite(ps.log_c)


# --- error recurrence --------------------------------------------------------

def test_epsilon_hat_single_edge_is_zeta():
    cfg = GameConfig(n=2, delta=1, eps=0.5, b=1, colorer_kind=ColorerKind.FIRST_FIT)
    tr = run_game(ObliviousSchedule([(0, 1)]), cfg)
    table = epsilon_hat(tr, zeta=0.25)
    assert table.value(0, 1) == 0.25
    assert table.value(1, 1) == 0.25


def test_epsilon_hat_isolated_vertex_is_zeta_every_phase():
    cfg = GameConfig(n=4, delta=2, eps=0.5, b=2, colorer_kind=ColorerKind.FIRST_FIT)
    tr = run_game(ObliviousSchedule([(0, 1)]), cfg)
    table = epsilon_hat(tr, zeta=0.125)
    for r in (1, 2):
        assert table.value(3, r) == 0.125


def test_epsilon_hat_two_phase_unroll():
    # (1,2) arrives in phase 1 of vertex 1; (0,1) arrives in phase 2 of vertex 1,
    # so the value at (0,1) picks up one recursive term
    cfg = GameConfig(n=3, delta=2, eps=0.5, b=2, colorer_kind=ColorerKind.FIRST_FIT)
    tr = run_game(ObliviousSchedule([(1, 2), (0, 1)]), cfg)
    coef = 5.0 / (cfg.delta * cfg.eps**2)
    zeta = 1e-3
    table = epsilon_hat(tr, zeta)
    assert math.isclose(table.value(1, 1), zeta, rel_tol=1e-12)
    assert math.isclose(table.value(0, 1), zeta + coef * zeta, rel_tol=1e-12)
    # the path bound enumerates the extra length-2 walk
    bound = path_bound(tr, 0, 1, zeta)
    assert math.isclose(bound, zeta * (1 + coef + coef**2), rel_tol=1e-12)
    assert table.value(0, 1) <= bound


def test_epsilon_hat_star_with_second_phase_edge_unrolls_by_hand():
    # star at c = 0 with leaves 1, 2, 3 arriving in order, then (1, 2) in
    # phase 2 of both leaves.  Unrolling: eps_hat^1(c) = z, eps_hat^1(leaf2)
    # = z + w*z, eps_hat^2(leaf1) = z*(1 + w + w^2).
    cfg = GameConfig(n=4, delta=3, eps=0.5, b=3, colorer_kind=ColorerKind.FIRST_FIT)
    tr = run_game(ObliviousSchedule([(0, 1), (0, 2), (0, 3), (1, 2)]), cfg)
    w = 5.0 / (cfg.delta * cfg.eps**2)
    z = 1e-4
    table = epsilon_hat(tr, z)
    assert math.isclose(table.value(0, 1), z, rel_tol=1e-12)
    assert math.isclose(table.value(2, 1), z * (1 + w), rel_tol=1e-12)
    assert math.isclose(table.value(1, 2), z * (1 + w + w**2), rel_tol=1e-12)
    # the path enumeration adds the second length-1 path through the star edge
    assert math.isclose(path_bound(tr, 1, 2, z), z * (1 + 2 * w + w**2 + w**3),
                        rel_tol=1e-12)
    assert table.value(1, 2) <= path_bound(tr, 1, 2, z)


def test_epsilon_hat_nondecreasing_in_phase():
    cfg = GameConfig(n=8, delta=7, eps=0.4, b=7, seed=1)
    tr = run_game(random_order(complete_graph(8).edges, seed=2, m=cfg.m, delta=7), cfg)
    table = epsilon_hat(tr, zeta=0.01)
    for v in range(8):
        for r in range(1, cfg.b):
            assert table.value(v, r) <= table.value(v, r + 1) + 1e-15


def test_epsilon_hat_order_independence():
    cfg = GameConfig(n=7, delta=6, eps=0.4, b=3, phase_kind=PhaseKind.RANDOM_ORDER, seed=3)
    tr = run_game(random_order(complete_graph(7).edges, seed=4, m=cfg.m,
                               scatter_nulls=True, delta=6), cfg)
    asc = epsilon_hat(tr, zeta=0.02, tie_break="ascending")
    desc = epsilon_hat(tr, zeta=0.02, tie_break="descending")
    assert asc.values == desc.values
    with pytest.raises(ConfigurationError):
        epsilon_hat(tr, 0.02, tie_break="sideways")


def test_epsilon_hat_requires_positive_eps():
    cfg = GameConfig.with_palette_size(4, 3, 3, b=1, colorer_kind=ColorerKind.FIRST_FIT)
    tr = run_game(ObliviousSchedule([(0, 1)]), cfg)
    with pytest.raises(ConfigurationError):
        epsilon_hat(tr, 0.1)


def test_is_error_controlled_examples():
    cfg = GameConfig(n=2, delta=1, eps=0.5, b=1, colorer_kind=ColorerKind.FIRST_FIT)
    tr = run_game(ObliviousSchedule([(0, 1)]), cfg)
    eps = 0.5
    ok0, _, worst0 = is_error_controlled(epsilon_hat(tr, 0.0), eps)
    assert ok0 and worst0 == 0
    ok_small, _, _ = is_error_controlled(epsilon_hat(tr, eps**3 / 20), eps)
    assert ok_small
    ok_big, worst_pair, worst = is_error_controlled(epsilon_hat(tr, eps**3 / 5), eps)
    assert not ok_big and worst == eps**3 / 5 and worst_pair is not None


def test_paper_zeta_controls_small_dense_instance():
    # with the dense-case zeta (astronomically small) the recurrence values
    # stay far below eps^3/10 on any desk-scale transcript
    cfg = GameConfig(n=6, delta=5, eps=0.5, b=5, seed=6)
    tr = run_game(random_order(complete_graph(6).edges, seed=7, m=cfg.m, delta=5), cfg)
    ps = parameter_set(0.5, 1.2)
    ok, _, _ = is_error_controlled(epsilon_hat(tr, ps.zeta), 0.5)
    assert ok


def test_path_bound_no_edges():
    class NullBuilder:
        oblivious = True

        def next_edge(self, view, i, rng):
            return None

    cfg = GameConfig(n=3, delta=2, eps=0.5, b=2)
    tr = run_game(NullBuilder(), cfg)
    assert path_bound(tr, 0, 1, zeta=0.3) == 0.3


def test_path_bound_dominates_dp_on_random_runs():
    rng = random.Random(8)
    for _ in range(10):
        n = rng.randrange(4, 7)
        delta = rng.randrange(2, 4)
        cfg = GameConfig(n=n, delta=delta, eps=0.5, b=rng.randrange(1, delta + 1),
                         seed=rng.randrange(1 << 20))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        rng.shuffle(edges)
        picked, deg = [], [0] * n
        for u, v in edges:
            if len(picked) == 7:
                break
            if deg[u] < delta and deg[v] < delta:
                picked.append((u, v))
                deg[u] += 1
                deg[v] += 1
        tr = run_game(ObliviousSchedule(picked), cfg)
        table = epsilon_hat(tr, zeta=0.05)
        for v in range(n):
            for r in range(1, cfg.b + 1):
                assert table.value(v, r) <= path_bound(tr, v, r, 0.05) * (1 + 1e-12)


def test_path_bound_caps():
    cfg = GameConfig(n=8, delta=7, eps=0.5, b=1, seed=1)
    tr = run_game(random_order(complete_graph(8).edges, seed=1, m=cfg.m, delta=7), cfg)
    with pytest.raises(OracleCapError):
        path_bound(tr, 0, 1, 0.1)  # 28 edges > 12-edge cap
    cfg2 = GameConfig(n=4, delta=3, eps=0.5, b=3, seed=1)
    tr2 = run_game(random_order(complete_graph(4).edges, seed=1, m=cfg2.m, delta=3), cfg2)
    with pytest.raises(OracleCapError):
        path_bound(tr2, 0, 3, 0.1, max_paths=2)


# --- bound calculators -------------------------------------------------------

def test_freedman_examples():
    assert freedman_bound(1, 1, 0) == 1.0
    assert math.isclose(freedman_bound(1, 1, 3), math.exp(-2.25), rel_tol=1e-12)
    prev = 1.0
    for dev in (1, 5, 25, 125, 625):
        cur = freedman_bound(1, 100, dev)
        assert cur <= prev
        prev = cur
    with pytest.raises(ConfigurationError):
        freedman_bound(0, 1, 1)
    with pytest.raises(ConfigurationError):
        freedman_bound(1, -1, 1)


def test_derived_concentration_examples():
    assert math.isclose(derived_concentration_bound(1, 1, 128, 1), math.exp(-1), rel_tol=1e-12)
    one = derived_concentration_bound(1, 1, 128, 1)
    two = derived_concentration_bound(2, 1, 128, 1)
    assert math.isclose(two, one**2, rel_tol=1e-12)
    with pytest.raises(ConfigurationError):
        derived_concentration_bound(1, 1, 128, 0)


def test_hypergeometric_bound_examples():
    assert hypergeometric_tail(100, 10, 10, 0) == 1.0
    assert math.isclose(hypergeometric_tail(100, 10, 10, 3), math.exp(-9 / 4), rel_tol=1e-12)
    with pytest.raises(ConfigurationError):
        hypergeometric_tail(10, 11, 5, 1)


def test_exact_hypergeometric_tail_below_bound():
    m, d, k = 20, 6, 8
    mu = k * d / m
    for t in (1, 2, 3, 4):
        exact = exact_hypergeometric_tail(m, d, k, math.ceil(mu + t))
        assert float(exact) <= hypergeometric_tail(m, d, k, t) + 1e-12


def test_balance_failure_bound_examples():
    assert math.isclose(balance_failure_bound(20, 1), math.exp(-1), rel_tol=1e-12)
    assert balance_failure_bound(10, 1000) > 0.999
    assert balance_failure_bound(10**6, 1) < 1e-300 or balance_failure_bound(10**6, 1) == 0.0
    with pytest.raises(ConfigurationError):
        balance_failure_bound(0, 1)
