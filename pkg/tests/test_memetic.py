import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapsolver.core import Assignment, Family, assignment_weight, canonicalize
from mapsolver.errors import DomainError
from mapsolver.instances import InstanceId, generate
from mapsolver.localsearch import DV, TWO_OPT, greedy_construct, local_search, parse_kind
from mapsolver.memetic import (
    MemeticParams,
    Population,
    RunStats,
    VirtualClock,
    WallClock,
    build_first_generation,
    crossover,
    m_opt,
    n_swaps,
    next_generation,
    perturb,
    run_memetic,
    select,
)
from mapsolver.rng import SubtractiveRng

import oracles

DEFAULTS = MemeticParams()


def test_default_constants():
    p = MemeticParams()
    assert (p.a, p.b, p.c, p.p_m, p.mu_m, p.mu_f, p.l) == (0.08, 0.35, 0.85, 0.5, 0.1, 0.2, 3)
    with pytest.raises(DomainError):
        MemeticParams(tau=0)


def test_m_opt_examples():
    assert m_opt(10, 0.01, DEFAULTS) == 9
    assert m_opt(1, 1, DEFAULTS) == 2
    assert m_opt(123, 4.5, MemeticParams(a=7.4, b=0, c=0)) == 7
    assert m_opt(1, 1, MemeticParams(a=0.4, b=0, c=0)) == 2
    assert m_opt(1e9, 1e-12, DEFAULTS) == 10**6
    with pytest.raises(DomainError):
        m_opt(0, 1, DEFAULTS)
    with pytest.raises(DomainError):
        m_opt(1, -1, DEFAULTS)


@settings(max_examples=100)
@given(st.floats(0.01, 1e4), st.floats(0.01, 1e4), st.floats(1e-6, 10))
def test_m_opt_monotone(tau1, tau2, t):
    lo, hi = sorted((tau1, tau2))
    assert m_opt(lo, t, DEFAULTS) <= m_opt(hi, t, DEFAULTS)
    assert m_opt(lo, t, DEFAULTS) >= m_opt(lo, t * 2, DEFAULTS)


def test_swap_counts():
    assert n_swaps(10, 0) == 0
    assert n_swaps(10, 0.1) == 1
    assert n_swaps(40, 1.0) == 20
    assert n_swaps(60, 0.1) == 3
    assert n_swaps(7, 1.0) == 4


def test_perturb_zero_is_identity():
    a = canonicalize([(1, 2, 3), (2, 3, 1), (3, 1, 2)])
    assert perturb(a, 0, SubtractiveRng(1)) is a


def test_perturb_single_swap_touches_two_vectors():
    a = Assignment(np.stack([np.arange(10)] * 3, axis=1))
    b = perturb(a, 0.1, SubtractiveRng(4))
    changed = sum(x != y for x, y in zip(a.vectors, b.vectors))
    assert changed in (0, 2)  # swapping dimension 1 re-sorts into two changed vectors too
    assert a != b


def test_perturb_full_strength_bounds():
    n = 12
    a = Assignment(np.stack([np.arange(n)] * 4, axis=1))
    b = perturb(a, 1.0, SubtractiveRng(2))
    assert oracles.is_feasible(b.vectors, n, 4)
    assert sum(x not in set(a.vectors) for x in b.vectors) <= n


def test_perturb_draw_sequence():
    # u, then v from the other n-1 vectors, then d, for each swap
    a = Assignment(np.stack([np.arange(6)] * 3, axis=1))
    rng, ref = SubtractiveRng(17), oracles.DotNetRandom(17)
    rows = [list(r) for r in a.rows]
    for _ in range(n_swaps(6, 1.0)):
        u = ref.next_range(0, 6)
        v = ref.next_range(0, 5)
        v += v >= u
        d = ref.next_range(0, 3)
        rows[u][d], rows[v][d] = rows[v][d], rows[u][d]
    assert perturb(a, 1.0, rng) == Assignment(np.array(rows))


def test_crossover_identical_parents():
    a = canonicalize([(1, 2, 3), (2, 3, 1), (3, 1, 2)])
    x, y = crossover(a, a, SubtractiveRng(1))
    assert x == a and y == a


def test_crossover_keeps_shared_vectors():
    x = canonicalize([(1, 3, 4), (2, 1, 1), (3, 2, 3), (4, 4, 2)])
    y = canonicalize([(1, 4, 4), (2, 1, 1), (3, 3, 2), (4, 2, 3)])
    for seed in range(20):
        c1, c2 = crossover(x, y, SubtractiveRng(seed))
        assert (2, 1, 1) in c1.vectors and (2, 1, 1) in c2.vectors


def test_crossover_shape_mismatch():
    with pytest.raises(DomainError):
        crossover(canonicalize([(1, 1, 1)]), canonicalize([(1, 1)]), SubtractiveRng(0))


def test_crossover_children_feasible_property():
    rng = SubtractiveRng(99)
    for k in range(1000):
        n, s = 2 + k % 9, 2 + k % 4
        x = perturb(Assignment(np.stack([np.arange(n)] * s, axis=1)), 2.0, rng)
        y = perturb(x, 0.5, rng)
        c1, c2 = crossover(x, y, rng)
        assert oracles.is_feasible(c1.vectors, n, s)
        assert oracles.is_feasible(c2.vectors, n, s)


def test_crossover_mixing_ratio():
    # disjoint parents: a child takes each unshared vector from its own parent 80% of the time,
    # repair then rewrites some of both kinds
    n = 40
    x = Assignment(np.stack([np.arange(n)] * 3, axis=1))
    y = Assignment(np.stack([np.arange(n), (np.arange(n) + 1) % n, (np.arange(n) + 2) % n], axis=1))
    rng = SubtractiveRng(5)
    own = foreign = 0
    xset, yset = set(x.vectors), set(y.vectors)
    for _ in range(50):
        c1, _ = crossover(x, y, rng)
        own += sum(v in xset for v in c1.vectors)
        foreign += sum(v in yset for v in c1.vectors)
    assert own > 2 * foreign
    assert own <= 0.8 * 50 * n * 1.1


def test_select_keeps_distinct_lightest():
    a = canonicalize([(1, 1), (2, 2)])
    b = canonicalize([(1, 2), (2, 1)])
    members, weights = select([(5.0, a), (3.0, b), (5.0, a), (3.0, b)], 3)
    assert members == [b, a] and weights == [3.0, 5.0]


def test_virtual_clock_counts_invocations():
    c = VirtualClock(4, tau=2.0)
    assert not c.expired()
    for _ in range(4):
        assert c.charge(123.0) == 0.5
    assert c.expired() and c.elapsed() == 2.0


def make_population(inst, size, seed):
    rng = SubtractiveRng(seed)
    g = greedy_construct(inst)
    pool = []
    for _ in range(size * 3):
        a = local_search(inst, perturb(g, 0.5, rng), TWO_OPT)
        pool.append((assignment_weight(inst, a), a))
    members, weights = select(pool, size)
    return Population(members, weights, size)


def test_steady_state_pool_size():
    inst = generate(InstanceId(Family.CLIQUE, 3, 30, 1))
    pop = make_population(inst, 6, 1)
    assert len(pop) == 6
    stats = RunStats()
    nxt = next_generation(pop, inst, DEFAULTS, TWO_OPT, SubtractiveRng(3), stats=stats)
    assert stats.pool_sizes == [3 * 6]
    assert len(nxt) <= 6
    assert nxt.best_weight <= pop.best_weight


def test_odd_pool_drops_worst():
    inst = generate(InstanceId(Family.CLIQUE, 3, 30, 2))
    pop = make_population(inst, 5, 2)
    pop = Population(pop.members, pop.weights, 6)  # 3*6 - 5 is odd
    stats = RunStats()
    next_generation(pop, inst, DEFAULTS, TWO_OPT, SubtractiveRng(3), stats=stats)
    # 4 survivors + 7 pairs of children
    assert stats.pool_sizes == [4 + 14]


def test_next_generation_needs_two():
    inst = generate(InstanceId(Family.CLIQUE, 3, 5, 1))
    g = greedy_construct(inst)
    with pytest.raises(DomainError):
        next_generation(Population([g], [1.0], 2), inst, DEFAULTS, TWO_OPT, SubtractiveRng(0))


def test_collapse_shrinks_population():
    inst = generate(InstanceId(Family.RANDOM, 3, 2, 1))
    g = greedy_construct(inst)
    other = canonicalize([(1, 2, 2), (2, 1, 1)]) if g.vectors != [(1, 2, 2), (2, 1, 1)] else canonicalize(
        [(1, 1, 1), (2, 2, 2)]
    )
    pop = Population([g, g, g], [1.0, 1.0, 1.0], 3)
    members, _ = select(list(zip([1.0] * 3, pop.members)), 3)
    assert len(members) == 1
    assert other not in members


def test_first_generation_invariants():
    inst = generate(InstanceId(Family.CLIQUE, 3, 20, 1))
    clock = VirtualClock(60, tau=1.0)
    stats = RunStats()
    pop, m, t = build_first_generation(inst, DEFAULTS, DV(None), SubtractiveRng(1), clock, stats)
    assert t == pytest.approx(clock.tick)
    assert m == max(2, min(stats.first_gen_ls_calls, m_opt(DEFAULTS.tau, t, DEFAULTS)))
    keys = {a.key for a in pop.members}
    assert len(keys) == len(pop)
    for a, w in zip(pop.members, pop.weights):
        assert oracles.is_feasible(a.vectors, 20, 3)
        assert w == assignment_weight(inst, a)
        assert local_search(inst, a, DV(None)) == a
    assert pop.weights == sorted(pop.weights)


def test_first_generation_slow_search_clamps_to_two():
    inst = generate(InstanceId(Family.CLIQUE, 3, 10, 1))
    clock = VirtualClock(2, tau=1.0)  # each search costs half the budget
    pop, m, t = build_first_generation(inst, DEFAULTS, DV(None), SubtractiveRng(1), clock)
    assert m == 2 and t == 0.5


def test_forced_size():
    inst = generate(InstanceId(Family.CLIQUE, 3, 20, 1))
    stats = RunStats()
    pop, m, _ = build_first_generation(
        inst, DEFAULTS, DV(None), SubtractiveRng(1), VirtualClock(500), stats, forced_m=17
    )
    assert m == 17 and stats.first_gen_ls_calls == 17


def test_run_is_deterministic_under_virtual_clock():
    inst = generate(InstanceId(Family.RANDOM, 3, 12, 1))

    def go():
        best, stats = run_memetic(inst, DEFAULTS, parse_kind("sDVv"), SubtractiveRng(8), VirtualClock(40, 1.0))
        return best, stats.trajectory, stats.generations, stats.ls_calls

    assert go() == go()


def test_run_trajectory_and_budget():
    inst = generate(InstanceId(Family.SQUARE_ROOT, 3, 15, 1))
    best, stats = run_memetic(inst, DEFAULTS, DV(None), SubtractiveRng(2), VirtualClock(80, 1.0))
    ws = [w for _, w in stats.trajectory]
    assert ws == sorted(ws, reverse=True)
    assert stats.ls_calls <= 80
    assert assignment_weight(inst, best) == pytest.approx(ws[-1])


def test_wall_clock_overshoot_is_bounded():
    inst = generate(InstanceId(Family.CLIQUE, 3, 20, 1))
    best, stats = run_memetic(inst, MemeticParams(tau=0.3), DV(None), SubtractiveRng(2), WallClock(0.3))
    assert stats.elapsed < 0.3 + 0.25


def test_single_vector_instance():
    inst = generate(InstanceId(Family.RANDOM, 3, 1, 1))
    best, stats = run_memetic(inst, DEFAULTS, DV(None), SubtractiveRng(0), VirtualClock(10))
    assert best.vectors == [(1, 1, 1)]


def test_tiny_instance_collapse_is_survived():
    # n=2, s=2 has only two assignments; the run must not crash or stall
    inst = generate(InstanceId(Family.CLIQUE, 2, 2, 1))
    best, stats = run_memetic(inst, DEFAULTS, DV(None), SubtractiveRng(0), VirtualClock(30))
    w = oracles.map_brute(lambda v: float(inst.weights.edges[0, 1, v[0] - 1, v[1] - 1]), 2, 2)
    assert assignment_weight(inst, best) == w


def test_wall_clock_toy_reaches_brute_force_optimum():
    # index 5 is the toy whose greedy neighbourhood is a trap
    inst = generate(InstanceId(Family.RANDOM, 3, 4, 5))
    best, _ = run_memetic(inst, MemeticParams(tau=1.0), parse_kind("sDVv"), SubtractiveRng(0), WallClock(1.0))
    opt = oracles.map_brute(lambda v: oracles.tensor_weight(inst.weights.weights, v), 4, 3)
    assert assignment_weight(inst, best) == opt == 66
