"""Tuning the population-size constants (a, b, c).

Memetic runs with the population size forced to each candidate m are cached
per (instance, budget). For a triple (a, b, c) every (instance, budget) cell
predicts a size, snaps it to the nearest candidate, and scores the cached
result by its scaled error between the best and worst candidate. The tuner
minimizes the mean of these scores (gamma) over an exhaustive grid.
"""

from __future__ import annotations

import csv
import itertools
import statistics
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ProblemInstance, assignment_weight, scaled_error
from .errors import DomainError
from .instances import InstanceId, generate
from .localsearch import LocalSearchKind, default_local_search, greedy_rows, improve_rows, warm_up
from .memetic import MemeticParams, WallClock, run_memetic
from .rng import SubtractiveRng

CANDIDATE_SIZES = (2, 3, 5, 8, 12, 18, 27, 40, 60, 90, 135)


def _frange(lo: float, hi: float, step: float) -> tuple[float, ...]:
    k = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(k + 1))


DEFAULT_GRID = {
    "a": _frange(0.02, 0.2, 0.02),
    "b": _frange(0.1, 0.6, 0.05),
    "c": _frange(0.5, 1.1, 0.05),
}


@dataclass
class ErrorCache:
    """Per-rep weights of forced-size runs plus a measured LS time per instance."""

    entries: dict = field(default_factory=dict)  # (instance_id, tau, m) -> [weight per rep]
    ls_time: dict = field(default_factory=dict)  # instance_id -> seconds

    @property
    def instances(self) -> list[str]:
        return sorted({k[0] for k in self.entries})

    @property
    def budgets(self) -> list[float]:
        return sorted({k[1] for k in self.entries})

    @property
    def sizes(self) -> list[int]:
        return sorted({k[2] for k in self.entries})

    def mean_weight(self, iid: str, tau: float, m: int) -> float:
        try:
            return statistics.fmean(self.entries[(iid, tau, m)])
        except KeyError:
            raise DomainError(f"cache has no entry for {iid} tau={tau} m={m}") from None

    def check_complete(self) -> None:
        if not self.entries:
            raise DomainError("error cache is empty")
        for iid in self.instances:
            if iid not in self.ls_time:
                raise DomainError(f"cache has no local-search time for {iid}")
            for tau in self.budgets:
                for m in self.sizes:
                    if not self.entries.get((iid, tau, m)):
                        raise DomainError(f"cache has no entry for {iid} tau={tau} m={m}")

    def save(self, path: str | Path) -> None:
        """Write ``<path>`` (weights) and ``<path stem>_ls_time.csv`` (timings)."""
        path = Path(path)
        with path.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["instance_id", "tau_s", "m", "rep", "weight"])
            for (iid, tau, m), weights in sorted(self.entries.items()):
                for rep, weight in enumerate(weights):
                    w.writerow([iid, repr(tau), m, rep, repr(weight)])
        with ls_time_path(path).open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["instance_id", "ls_time_s"])
            for iid, t in sorted(self.ls_time.items()):
                w.writerow([iid, repr(t)])

    @classmethod
    def load(cls, path: str | Path) -> "ErrorCache":
        path = Path(path)
        cache = cls()
        with path.open(newline="") as f:
            rows = sorted(csv.DictReader(f), key=lambda r: int(r["rep"]))
            for row in rows:
                key = (row["instance_id"], float(row["tau_s"]), int(row["m"]))
                cache.entries.setdefault(key, []).append(float(row["weight"]))
        with ls_time_path(path).open(newline="") as f:
            for row in csv.DictReader(f):
                cache.ls_time[row["instance_id"]] = float(row["ls_time_s"])
        return cache


def ls_time_path(path: Path) -> Path:
    return path.with_name(path.stem + "_ls_time.csv")


def measure_ls_time(instance: ProblemInstance, ls: LocalSearchKind, repeats: int = 3) -> float:
    """Median time of ``ls`` applied to the greedy assignment."""
    warm_up()
    start = greedy_rows(instance)
    times = []
    for _ in range(repeats):
        rows = start.copy()
        t0 = time.perf_counter()
        improve_rows(instance, rows, ls)
        times.append(time.perf_counter() - t0)
    return max(statistics.median(times), 1e-9)


def cell_seed(iid: str, tau: float, rep: int) -> int:
    # shared by every size m so that sizes are compared on common random numbers
    return zlib.crc32(f"{iid}|{tau!r}|{rep}".encode()) & 0x7FFFFFFF


def _run_cell(args) -> tuple:
    iid, tau, m, rep, ls_code, params = args
    from .localsearch import parse_kind

    inst = generate(InstanceId.parse(iid))
    p = MemeticParams(**{**params, "tau": tau})
    best, _ = run_memetic(inst, p, parse_kind(ls_code), SubtractiveRng(cell_seed(iid, tau, rep)), WallClock(tau), m)
    return (iid, tau, m, rep), assignment_weight(inst, best)


def collect_errors(
    instances,
    budgets,
    sizes,
    reps: int = 3,
    ls_for=None,
    params: MemeticParams | None = None,
    workers: int = 1,
) -> ErrorCache:
    """Run every (instance, budget, size, rep) cell with the population size forced.

    ``instances`` are :class:`InstanceId` values (or their string form);
    ``ls_for`` maps a family to the local search to use.
    """
    ids = [i if isinstance(i, InstanceId) else InstanceId.parse(str(i)) for i in instances]
    budgets = [float(t) for t in budgets]
    sizes = [int(m) for m in sizes]
    if not ids or not budgets or not sizes:
        raise DomainError("instances, budgets and sizes must all be non-empty")
    if reps < 1:
        raise DomainError("reps must be positive")
    ls_for = ls_for or default_local_search
    base = params or MemeticParams()
    pdict = {k: getattr(base, k) for k in ("a", "b", "c", "p_m", "mu_m", "mu_f", "l")}

    cache = ErrorCache()
    cells = []
    for iid in ids:
        ls = ls_for(iid.family)
        cache.ls_time[str(iid)] = measure_ls_time(generate(iid), ls)
        for tau, m, rep in itertools.product(budgets, sizes, range(reps)):
            cells.append((str(iid), tau, m, rep, ls.code, pdict))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    for (iid, tau, m, rep), weight in sorted(results):
        cache.entries.setdefault((iid, tau, m), []).append(weight)
    return cache


def snap(m: float, sizes) -> int:
    """Nearest candidate size; equidistant ties go to the smaller one."""
    best = None
    for c in sorted(sizes):
        if best is None or abs(c - m) < abs(best - m):
            best = c
    return best


def _scaled_table(cache: ErrorCache):
    """Scaled error per (instance, budget) cell for every size, plus the cells' t."""
    cache.check_complete()
    sizes = cache.sizes
    cells, ts, table = [], [], []
    for iid in cache.instances:
        for tau in cache.budgets:
            means = [cache.mean_weight(iid, tau, m) for m in sizes]
            lo, hi = min(means), max(means)
            table.append([scaled_error(w, lo, hi) for w in means])
            cells.append((iid, tau))
            ts.append(cache.ls_time[iid])
    return sizes, cells, np.array(ts), np.array(table)


def _gamma(a, b, c, sizes, cells, ts, table) -> float:
    scores = []
    for k, (iid, tau) in enumerate(cells):
        m = a * tau**b / ts[k] ** c
        scores.append(table[k][sizes.index(snap(m, sizes))])
    return statistics.fmean(scores)


def gamma(a: float, b: float, c: float, cache: ErrorCache) -> float:
    """Mean scaled error of the sizes (a, b, c) would pick, over all cells."""
    return _gamma(a, b, c, *_scaled_table(cache))


def fixed_gamma(m: int, cache: ErrorCache) -> float:
    """gamma when every cell uses population size ``m``."""
    sizes, _, _, table = _scaled_table(cache)
    return statistics.fmean(table[:, sizes.index(m)])


def tune(cache: ErrorCache, grid: dict | None = None) -> tuple[float, float, float, float]:
    """Exhaustive grid search; returns (a, b, c, gamma) with ties to the smallest triple."""
    grid = grid or DEFAULT_GRID
    axes = [sorted(float(x) for x in grid[k]) for k in ("a", "b", "c")]
    if not all(axes):
        raise DomainError("grid axes must be non-empty")
    prepared = _scaled_table(cache)
    best = None
    for a, b, c in itertools.product(*axes):
        g = _gamma(a, b, c, *prepared)
        if best is None or g < best[3]:
            best = (a, b, c, g)
    return best


def parse_grid(text: str) -> dict:
    """``a=0.02:0.2:0.02,b=0.35,c=0.5:1.1:0.05`` style grid; missing axes use defaults."""
    grid = dict(DEFAULT_GRID)
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, spec = part.partition("=")
        key = key.strip()
        if key not in grid or not spec:
            raise DomainError(f"bad grid axis {part!r}")
        try:
            nums = [float(x) for x in spec.split(":")]
        except ValueError:
            raise DomainError(f"bad grid axis {part!r}") from None
        if len(nums) == 1:
            grid[key] = (nums[0],)
        elif len(nums) == 3 and nums[2] > 0 and nums[1] >= nums[0]:
            grid[key] = _frange(*nums)
        else:
            raise DomainError(f"bad grid axis {part!r}")
    return grid
