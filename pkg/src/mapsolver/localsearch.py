"""Greedy construction, the 2-AP solver and the local-search family.

Local searches are addressed by the codes used in result tables:

========  ==========================================
code      search
========  ==========================================
2opt      best recombination of every vector pair
3opt      best recombination of every vector triple
vopt      variable-depth chains of coordinate swaps
1DV       dimensionwise, fixed sets of size <= 1
2DV       dimensionwise, fixed sets of size <= 2
sDV       dimensionwise, every split
1DV2      1DV alternated with 2opt
2DV2      2DV alternated with 2opt
sDV3      sDV alternated with 3opt
sDVv      sDV alternated with vopt
========  ==========================================

The ``vopt`` chain search is a Lin-Kernighan style rendering of the variable
depth interchange idea; it is not a transcription of any published code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .core import Assignment, Family, ProblemInstance, _check_rows
from .errors import DomainError


@dataclass(frozen=True)
class DimensionSplit:
    """0-based fixed/free dimension sets in canonical orientation."""

    fixed: tuple[int, ...]
    free: tuple[int, ...]

    def __post_init__(self):
        if not self.fixed or not self.free:
            raise DomainError("both sides of a split must be non-empty")
        if set(self.fixed) & set(self.free):
            raise DomainError("fixed and free dimensions overlap")
        if not (len(self.fixed) < len(self.free) or (len(self.fixed) == len(self.free) and 0 in self.fixed)):
            raise DomainError("split is not in canonical orientation")


@lru_cache(maxsize=None)
def canonical_splits(s: int, k: int | None = None) -> tuple[DimensionSplit, ...]:
    """Canonical splits with ``min(|fixed|, |free|) <= k`` (all when k is None).

    Ordered by fixed-set size, then lexicographically.
    """
    out = []
    dims = range(s)
    for size in range(1, s // 2 + 1):
        if k is not None and size > k:
            break
        for fixed in itertools.combinations(dims, size):
            if 2 * size == s and 0 not in fixed:
                continue
            free = tuple(d for d in dims if d not in fixed)
            out.append(DimensionSplit(fixed, free))
    return tuple(out)


@lru_cache(maxsize=None)
def _split_masks(s: int, k: int | None) -> np.ndarray:
    splits = canonical_splits(s, k)
    masks = np.zeros((len(splits), s), dtype=np.bool_)
    for t, sp in enumerate(splits):
        masks[t, list(sp.fixed)] = True
    return masks


@dataclass(frozen=True)
class LocalSearchKind:
    """``tag`` is one of ``2opt``, ``3opt``, ``vopt``, ``dv`` or ``combined``.

    ``depth`` is the DV bound (None means s); ``parts`` holds the two
    components of a combined search.
    """

    tag: str
    depth: int | None = None
    parts: tuple["LocalSearchKind", ...] = ()

    def __post_init__(self):
        if self.tag not in ("2opt", "3opt", "vopt", "dv", "combined"):
            raise DomainError(f"unknown local search tag {self.tag!r}")
        if self.tag == "combined":
            if len(self.parts) != 2 or any(p.tag == "combined" for p in self.parts):
                raise DomainError("combined search needs two non-combined components")
        if self.tag == "dv" and self.depth is not None and self.depth < 1:
            raise DomainError("DV depth must be positive")

    @property
    def code(self) -> str:
        if self.tag == "dv":
            return f"{'s' if self.depth is None else self.depth}DV"
        if self.tag == "combined":
            first, second = self.parts
            suffix = {"2opt": "2", "3opt": "3", "vopt": "v"}.get(second.tag)
            if first.tag == "dv" and suffix:
                return first.code + suffix
            return f"{first.code}+{second.code}"
        return self.tag

    def __str__(self):
        return self.code


TWO_OPT = LocalSearchKind("2opt")
THREE_OPT = LocalSearchKind("3opt")
V_OPT = LocalSearchKind("vopt")


def DV(k: int | None = None) -> LocalSearchKind:
    return LocalSearchKind("dv", depth=k)


def combined(first: LocalSearchKind, second: LocalSearchKind) -> LocalSearchKind:
    return LocalSearchKind("combined", parts=(first, second))


LOCAL_SEARCH_CODES = {
    "2opt": TWO_OPT,
    "3opt": THREE_OPT,
    "vopt": V_OPT,
    "1DV": DV(1),
    "2DV": DV(2),
    "sDV": DV(None),
    "1DV2": combined(DV(1), TWO_OPT),
    "2DV2": combined(DV(2), TWO_OPT),
    "sDV3": combined(DV(None), THREE_OPT),
    "sDVv": combined(DV(None), V_OPT),
}


def default_local_search(family: Family) -> LocalSearchKind:
    """sDVv for independent weights, sDV for decomposable ones."""
    return LOCAL_SEARCH_CODES["sDV" if family.decomposable else "sDVv"]


def parse_kind(code: str) -> LocalSearchKind:
    try:
        return LOCAL_SEARCH_CODES[code]
    except KeyError:
        raise DomainError(f"unknown local search {code!r}; known: {', '.join(LOCAL_SEARCH_CODES)}") from None


def solve_ap(cost) -> tuple[list[int], float]:
    """Minimum-cost perfect matching of a square matrix.

    Returns the 0-based column assigned to each row and the total cost.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DomainError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DomainError("cost matrix has non-finite entries")
    if c.shape[0] == 0:
        return [], 0.0
    sigma = _kernels.solve_ap(np.ascontiguousarray(c))
    total = float(c[np.arange(len(sigma)), sigma].sum())
    return [int(x) for x in sigma], total


def greedy_rows(instance: ProblemInstance) -> np.ndarray:
    rows = _kernels.greedy(instance.kernel_model, instance.n, instance.s, instance.lower_bound, instance.prunable)
    return rows[np.argsort(rows[:, 0])]


def greedy_construct(instance: ProblemInstance) -> Assignment:
    return Assignment(greedy_rows(instance))


@lru_cache(maxsize=None)
def warm_up() -> None:
    """Compile (or load) every kernel once so later timings exclude it."""
    from .core import IndependentTensor

    inst = ProblemInstance(3, 3, Family.RANDOM, IndependentTensor(np.arange(27).reshape(3, 3, 3) % 7 + 1))
    rows = greedy_rows(inst)
    for kind in (TWO_OPT, THREE_OPT, V_OPT, DV(None)):
        improve_rows(inst, rows.copy(), kind)


def improve_rows(instance: ProblemInstance, rows: np.ndarray, kind: LocalSearchKind) -> bool:
    """Run ``kind`` to convergence on a 0-based row array in place.

    Rows may come back in any order; returns whether anything improved.
    """
    model = instance.kernel_model
    tag = kind.tag
    if tag == "dv":
        k = kind.depth if kind.depth is not None and kind.depth < instance.s else None
        masks = _split_masks(instance.s, k)
        if masks.shape[0] == 0:
            return False
        return _kernels.dimensionwise(model, rows, masks)
    if tag == "2opt":
        return _kernels.two_opt(model, rows)
    if tag == "3opt":
        return _kernels.three_opt(model, rows)
    if tag == "vopt":
        return _kernels.v_opt(model, rows)
    first, second = kind.parts
    improved = improve_rows(instance, rows, first)
    while True:
        if not improve_rows(instance, rows, second):
            break
        improved = True
        if not improve_rows(instance, rows, first):
            break
    return improved


def local_search(instance: ProblemInstance, a: Assignment, kind: LocalSearchKind) -> Assignment:
    """Improve ``a`` with ``kind`` until no move in its neighborhood helps."""
    _check_rows(np.asarray(a.rows), instance.n, instance.s)
    rows = np.array(a.rows, dtype=np.int64)
    improve_rows(instance, rows, kind)
    return Assignment(rows)


def dimensionwise_search(instance: ProblemInstance, a: Assignment, k: int | None) -> Assignment:
    """kDV with ``k`` in {1, 2} or None for s."""
    return local_search(instance, a, DV(k))


def two_opt(instance: ProblemInstance, a: Assignment) -> Assignment:
    return local_search(instance, a, TWO_OPT)


def three_opt(instance: ProblemInstance, a: Assignment) -> Assignment:
    return local_search(instance, a, THREE_OPT)


def v_opt(instance: ProblemInstance, a: Assignment) -> Assignment:
    return local_search(instance, a, V_OPT)


def combined_search(
    instance: ProblemInstance, a: Assignment, first: LocalSearchKind, second: LocalSearchKind
) -> Assignment:
    return local_search(instance, a, combined(first, second))
