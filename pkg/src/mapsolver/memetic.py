"""Time-budgeted memetic algorithm with runtime population sizing.

The population size is ``a * tau**b / t**c`` where ``tau`` is the budget and
``t`` the mean local-search time measured while the first generation is
built. A run is driven by a clock object: :class:`WallClock` for real
budgets, :class:`VirtualClock` to count local-search invocations instead of
seconds (which makes runs reproducible bit for bit).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import Assignment, ProblemInstance
from .errors import DomainError
from .localsearch import LocalSearchKind, greedy_rows, improve_rows, warm_up
from .rng import SubtractiveRng

M_MIN, M_MAX = 2, 10**6


@dataclass(frozen=True)
class MemeticParams:
    a: float = 0.08
    b: float = 0.35
    c: float = 0.85
    p_m: float = 0.5
    mu_m: float = 0.1
    mu_f: float = 0.2
    l: int = 3
    tau: float = 3.0

    def __post_init__(self):
        for name in ("a", "p_m", "mu_m", "mu_f", "l", "tau"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.b < 0 or self.c < 0:
            raise DomainError("b and c must be non-negative")
        if self.p_m > 1:
            raise DomainError("p_m is a probability")


def m_opt_raw(tau: float, t: float, params: MemeticParams) -> float:
    if not (tau > 0 and t > 0):
        raise DomainError(f"tau and t must be positive, got tau={tau} t={t}")
    # extended precision keeps the result within one ulp of the exact value
    ld = np.longdouble
    x = ld(params.a) * np.power(ld(tau), ld(params.b)) / np.power(ld(t), ld(params.c))
    return float(x)


def m_opt(tau: float, t: float, params: MemeticParams) -> int:
    """Population size for budget ``tau`` and mean local-search time ``t``.

    Rounded half up and clamped to [2, 10**6].
    """
    x = m_opt_raw(tau, t, params)
    if x >= M_MAX:
        return M_MAX
    return max(M_MIN, math.floor(x + 0.5))


# clocks --------------------------------------------------------------------


class WallClock:
    """Monotonic wall clock with a budget in seconds."""

    virtual = False

    def __init__(self, budget: float):
        self.budget = float(budget)
        self._start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._start

    def expired(self) -> bool:
        return self.elapsed() >= self.budget

    def charge(self, seconds: float) -> float:
        """Account for one local-search invocation; returns its cost in clock time."""
        return seconds


class VirtualClock:
    """Counts local-search invocations; each one costs ``tau / budget_invocations``."""

    virtual = True

    def __init__(self, budget_invocations: int, tau: float = 1.0):
        if budget_invocations < 1 or tau <= 0:
            raise DomainError("virtual clock needs a positive budget")
        self.budget_invocations = int(budget_invocations)
        self.budget = float(tau)
        self.tick = self.budget / self.budget_invocations
        self.invocations = 0

    def elapsed(self) -> float:
        return self.invocations * self.tick

    def expired(self) -> bool:
        return self.invocations >= self.budget_invocations

    def charge(self, seconds: float) -> float:
        self.invocations += 1
        return self.tick


# operators -----------------------------------------------------------------


def n_swaps(n: int, mu: float) -> int:
    # round first so that e.g. 60 * 0.1 / 2 does not ceil to 4
    return math.ceil(round(n * mu / 2, 9))


def perturb(a: Assignment, mu: float, rng: SubtractiveRng) -> Assignment:
    """Random coordinate swaps between distinct vectors, ceil(n*mu/2) of them."""
    if mu < 0:
        raise DomainError("perturbation strength must be non-negative")
    n, s = a.rows.shape
    k = n_swaps(n, mu)
    if k == 0 or n < 2:
        return a
    rows = np.array(a.rows)
    for _ in range(k):
        u = rng.next_int(0, n)
        v = rng.next_int(0, n - 1)
        if v >= u:
            v += 1
        d = rng.next_int(0, s)
        rows[u, d], rows[v, d] = rows[v, d], rows[u, d]
    return Assignment(rows)


def _repair(child: np.ndarray, rng: SubtractiveRng) -> None:
    n, s = child.shape
    for d in range(s):
        seen = np.zeros(n, dtype=bool)
        dups = []
        for i in range(n):
            x = child[i, d]
            if seen[x]:
                dups.append(i)
            else:
                seen[x] = True
        if not dups:
            continue
        free = [int(x) for x in np.flatnonzero(~seen)]
        for i in dups:
            child[i, d] = free.pop(rng.next_int(0, len(free)))


def crossover(x: Assignment, y: Assignment, rng: SubtractiveRng) -> tuple[Assignment, Assignment]:
    """Two children keeping the parents' shared vectors; the rest mixed 80/20 and repaired."""
    if x.rows.shape != y.rows.shape:
        raise DomainError(f"parents have different shapes {x.rows.shape} and {y.rows.shape}")
    ykeys = {r.tobytes() for r in y.rows}
    xkeys = {r.tobytes() for r in x.rows}
    common = [r for r in x.rows if r.tobytes() in ykeys]
    p = [r for r in x.rows if r.tobytes() not in ykeys]
    q = [r for r in y.rows if r.tobytes() not in xkeys]
    if not p:
        return x, y
    pi = rng.permutation(len(p))
    omega = rng.permutation(len(q))
    c1, c2 = list(common), list(common)
    for j in range(len(p)):
        if rng.next_double() < 0.8:
            c1.append(p[pi[j]])
            c2.append(q[omega[j]])
        else:
            c1.append(q[omega[j]])
            c2.append(p[pi[j]])
    children = []
    for c in (c1, c2):
        rows = np.array(c, dtype=np.int64)
        _repair(rows, rng)
        children.append(Assignment(rows))
    return children[0], children[1]


# population ----------------------------------------------------------------


@dataclass
class Population:
    """Distinct members in ascending weight order; ``members[0]`` is the best."""

    members: list[Assignment]
    weights: list[float]
    target_size: int

    def __len__(self):
        return len(self.members)

    @property
    def best(self) -> Assignment:
        return self.members[0]

    @property
    def best_weight(self) -> float:
        return self.weights[0]


def select(pool: list[tuple[float, Assignment]], m: int) -> tuple[list[Assignment], list[float]]:
    """The ``m`` lightest distinct assignments; ties broken by coding."""
    seen = set()
    members, weights = [], []
    for w, a in sorted(pool, key=lambda p: (p[0], p[1].key)):
        if a.key in seen:
            continue
        seen.add(a.key)
        members.append(a)
        weights.append(w)
        if len(members) == m:
            break
    return members, weights


@dataclass
class RunStats:
    generations: int = 0
    ls_calls: int = 0
    ls_time: float = 0.0
    first_gen_ls_calls: int = 0
    first_gen_ls_time: float = 0.0
    t: float = 0.0  # mean LS time the population size was derived from
    pop_size: int = 0
    truncated: bool = False
    trajectory: list = field(default_factory=list)  # (elapsed, best weight)
    elapsed: float = 0.0
    pool_sizes: list = field(default_factory=list)

    @property
    def mean_ls_time(self) -> float:
        return self.ls_time / self.ls_calls if self.ls_calls else 0.0

    @property
    def first_gen_mean_ls_time(self) -> float:
        return self.first_gen_ls_time / self.first_gen_ls_calls if self.first_gen_ls_calls else 0.0


class _Improver:
    """Runs the local search, charging the clock and recording times."""

    def __init__(self, instance: ProblemInstance, ls: LocalSearchKind, clock, stats: RunStats):
        self.instance = instance
        self.ls = ls
        self.clock = clock
        self.stats = stats

    def __call__(self, a: Assignment) -> tuple[float, Assignment]:
        rows = np.array(a.rows)
        t0 = time.perf_counter()
        improve_rows(self.instance, rows, self.ls)
        cost = self.clock.charge(time.perf_counter() - t0)
        self.stats.ls_calls += 1
        self.stats.ls_time += cost
        return self.weight(rows), Assignment(rows)

    def weight(self, rows: np.ndarray) -> float:
        return float(_kernels.total_weight(self.instance.kernel_model, np.ascontiguousarray(rows)))


def _only_one_solution(instance: ProblemInstance) -> bool:
    return instance.n == 1


def build_first_generation(
    instance: ProblemInstance,
    params: MemeticParams,
    ls: LocalSearchKind,
    rng: SubtractiveRng,
    clock,
    stats: RunStats | None = None,
    forced_m: int | None = None,
    greedy: Assignment | None = None,
) -> tuple[Population, int, float]:
    """Produce LS(perturb(greedy, mu_f)) members while m1 <= m_opt(tau, t_cur/m1).

    With ``forced_m`` exactly that many are produced instead. Returns the
    population, its target size and the measured mean LS time.
    """
    stats = stats if stats is not None else RunStats()
    improve = _Improver(instance, ls, clock, stats)
    if greedy is None:
        greedy = Assignment(greedy_rows(instance))
    pool: list[tuple[float, Assignment]] = []
    keys = set()
    start = clock.elapsed()
    m1 = 0
    extra = 0
    while True:
        if clock.expired():
            break
        w, a = improve(perturb(greedy, params.mu_f, rng))
        m1 += 1
        pool.append((w, a))
        keys.add(a.key)
        t_cur = clock.elapsed() - start
        t = max(t_cur / m1, 1e-12)
        if forced_m is not None:
            more = m1 < forced_m
        else:
            more = m1 <= m_opt(params.tau, t, params)
        if not more:
            # keep going a little if everything collapsed onto one assignment
            if len(keys) >= 2 or _only_one_solution(instance) or extra >= 20:
                break
            extra += 1
    stats.first_gen_ls_calls = stats.ls_calls
    stats.first_gen_ls_time = stats.ls_time
    t = max((clock.elapsed() - start) / m1, 1e-12) if m1 else 0.0
    if forced_m is not None:
        m = forced_m
    elif m1:
        m = max(M_MIN, min(m1, m_opt(params.tau, t, params)))
    else:
        m = M_MIN
    members, weights = select(pool, m)
    if len(members) < 2:
        stats.truncated = True
    stats.t = t
    stats.pop_size = m
    return Population(members, weights, m), m, t


def next_generation(
    pop: Population,
    instance: ProblemInstance,
    params: MemeticParams,
    ls: LocalSearchKind,
    rng: SubtractiveRng,
    clock=None,
    stats: RunStats | None = None,
) -> Population:
    """One generation: keep the best, mutate the others, add crossover children, select."""
    if len(pop) < 2:
        raise DomainError("a generation needs at least two members")
    clock = clock if clock is not None else WallClock(math.inf)
    stats = stats if stats is not None else RunStats()
    improve = _Improver(instance, ls, clock, stats)
    m = pop.target_size
    members, weights = list(pop.members), list(pop.weights)
    # parity: drop the worst, unless that would leave a single parent
    if (params.l * m - len(members)) % 2 and len(members) > 2:
        members.pop()
        weights.pop()
    mi = len(members)
    n_pairs = (params.l * m - mi) // 2

    pool = [(weights[0], members[0])]
    for w, g in zip(weights[1:], members[1:]):
        if clock.expired():
            break
        if rng.next_double() < params.p_m:
            pool.append(improve(perturb(g, params.mu_m, rng)))
        else:
            pool.append((w, g))
    for _ in range(n_pairs):
        if clock.expired():
            break
        u = rng.next_int(0, mi)
        v = rng.next_int(0, mi - 1)
        if v >= u:
            v += 1
        x, y = crossover(members[u], members[v], rng)
        pool.append(improve(x))
        if clock.expired():
            break
        pool.append(improve(y))
    stats.pool_sizes.append(len(pool))
    new_members, new_weights = select(pool, m)
    stats.generations += 1
    return Population(new_members, new_weights, m)


def _inject(pop: Population, instance, rng, improve) -> Population:
    """Top up a population that lost its diversity with locally optimal random restarts."""
    pool = list(zip(pop.weights, pop.members))
    keys = {a.key for a in pop.members}
    need = pop.target_size
    n, s = instance.n, instance.s
    for _ in range(50):
        if len(keys) >= need or improve.clock.expired():
            break
        rows = np.empty((n, s), dtype=np.int64)
        rows[:, 0] = np.arange(n)
        for d in range(1, s):
            rows[:, d] = rng.permutation(n)
        w, a = improve(Assignment(rows))
        if a.key not in keys:
            pool.append((w, a))
            keys.add(a.key)
    members, weights = select(pool, pop.target_size)
    return Population(members, weights, pop.target_size)


def run_memetic(
    instance: ProblemInstance,
    params: MemeticParams,
    ls: LocalSearchKind,
    rng: SubtractiveRng,
    clock=None,
    forced_m: int | None = None,
) -> tuple[Assignment, RunStats]:
    """Run until the clock expires; returns the best assignment seen and run statistics."""
    warm_up()
    clock = clock if clock is not None else WallClock(params.tau)
    stats = RunStats()
    greedy = Assignment(greedy_rows(instance))
    improve = _Improver(instance, ls, clock, stats)
    best = greedy
    best_w = improve.weight(greedy.rows)
    stats.trajectory.append((clock.elapsed(), best_w))

    def note(p: Population):
        nonlocal best, best_w
        if len(p) and p.best_weight < best_w:
            best, best_w = p.best, p.best_weight
            stats.trajectory.append((clock.elapsed(), best_w))

    if not _only_one_solution(instance):
        pop, m, t = build_first_generation(instance, params, ls, rng, clock, stats, forced_m, greedy)
        note(pop)
        # n times the lightest vector weight is a proof of optimality
        floor = instance.n * instance.lower_bound
        stagnant = False
        while not clock.expired() and best_w > floor + 1e-9 * max(1.0, floor):
            if len(pop) < 2 or (stagnant and len(pop) < pop.target_size):
                pop = _inject(pop, instance, rng, improve)
                note(pop)
                if len(pop) < 2:
                    break
            before = {a.key for a in pop.members}
            pop = next_generation(pop, instance, params, ls, rng, clock, stats)
            stagnant = {a.key for a in pop.members} == before
            note(pop)
    stats.elapsed = clock.elapsed()
    return best, stats
