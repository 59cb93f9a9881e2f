"""Problem and solution model for the multidimensional assignment problem.

An s-AP instance has s dimensions of n coordinates each. A feasible
assignment is n vectors such that every dimension is a permutation of
{1, ..., n}. Public interfaces use 1-based coordinates; internally
assignments keep a 0-based ``(n, s)`` integer array sorted by the first
column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError


class Family(str, Enum):
    RANDOM = "r"
    CLIQUE = "cq"
    SQUARE_ROOT = "sr"
    GEOMETRIC = "ge"
    PRODUCT = "pr"

    @property
    def code(self) -> str:
        return self.value

    @classmethod
    def from_code(cls, code: str) -> "Family":
        try:
            return cls(code)
        except ValueError:
            raise DomainError(f"unknown family code {code!r}") from None

    @property
    def decomposable(self) -> bool:
        return self is not Family.RANDOM


class Combiner(str, Enum):
    SUM = "sum"
    ROOT_OF_SQUARES = "sqrt"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IndependentTensor:
    """One weight per vector, shape ``(n,) * s``."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(np.asarray(self.weights, dtype=np.int8)))


@dataclass(frozen=True, eq=False)
class EdgeDecomposable:
    """Edge matrices for every dimension pair, stored as ``(s, s, n, n)``.

    Only the upper triangle ``[i, j]`` with ``i < j`` is meaningful;
    ``d[i, j][x, y]`` is the weight of the edge between coordinate x of
    dimension i and coordinate y of dimension j.
    """

    edges: np.ndarray
    combiner: Combiner = Combiner.SUM

    def __post_init__(self):
        object.__setattr__(self, "edges", _readonly(np.asarray(self.edges, dtype=np.float64)))

    @classmethod
    def from_pairs(cls, matrices: dict, s: int, n: int, combiner: Combiner = Combiner.SUM):
        """Build from ``{(i, j): n x n matrix}`` with 0-based ``i < j``."""
        edges = np.zeros((s, s, n, n))
        for (i, j), m in matrices.items():
            if not 0 <= i < j < s:
                raise DomainError(f"bad dimension pair {(i, j)}")
            edges[i, j] = m
        return cls(edges, combiner)


@dataclass(frozen=True, eq=False)
class GeometricPoints:
    """``points[j, x]`` is the planar location of coordinate x in dimension j."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(np.asarray(self.points, dtype=np.float64)))

    def distances(self) -> np.ndarray:
        s, n, _ = self.points.shape
        edges = np.zeros((s, s, n, n))
        for i in range(s):
            for j in range(i + 1, s):
                diff = self.points[i][:, None, :] - self.points[j][None, :, :]
                edges[i, j] = np.sqrt((diff**2).sum(axis=2))
        return edges


@dataclass(frozen=True, eq=False)
class ProductArrays:
    """Vector weight is the product of ``arrays[j, e_j]`` over dimensions."""

    arrays: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "arrays", _readonly(np.asarray(self.arrays, dtype=np.int64)))


WeightModel = IndependentTensor | EdgeDecomposable | GeometricPoints | ProductArrays

_EMPTY_I8 = np.zeros(1, dtype=np.int8)
_EMPTY_EDGES = np.zeros((1, 1, 1, 1))
_EMPTY_FACTORS = np.zeros((1, 1))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    s: int
    n: int
    family: Family
    weights: WeightModel
    index: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.s < 2 or self.n < 1:
            raise DomainError(f"need s >= 2 and n >= 1, got s={self.s} n={self.n}")
        w = self.weights
        if isinstance(w, IndependentTensor):
            shape_ok = w.weights.shape == (self.n,) * self.s
        elif isinstance(w, EdgeDecomposable):
            shape_ok = w.edges.shape == (self.s, self.s, self.n, self.n)
        elif isinstance(w, GeometricPoints):
            shape_ok = w.points.shape == (self.s, self.n, 2)
        elif isinstance(w, ProductArrays):
            shape_ok = w.arrays.shape == (self.s, self.n)
        else:
            raise DomainError(f"unsupported weight model {type(w).__name__}")
        if not shape_ok:
            raise DomainError(f"{type(w).__name__} shape does not match s={self.s}, n={self.n}")

    @property
    def name(self) -> str:
        """Instance class name in table notation, e.g. ``3r40``."""
        return f"{self.s}{self.family.code}{self.n}"

    @property
    def instance_id(self) -> str:
        return f"{self.name}-{self.index}"

    @cached_property
    def kernel_model(self) -> tuple:
        w = self.weights
        strides = np.zeros(self.s, dtype=np.int64)
        if isinstance(w, IndependentTensor):
            strides = np.array([self.n ** (self.s - 1 - j) for j in range(self.s)], dtype=np.int64)
            return (_kernels.TENSOR, w.weights.reshape(-1).copy(), strides, _EMPTY_EDGES, _EMPTY_FACTORS, False, True)
        if isinstance(w, EdgeDecomposable):
            root = w.combiner is Combiner.ROOT_OF_SQUARES
            integral = not root and bool(np.all(w.edges == np.round(w.edges)))
            return (_kernels.EDGES, _EMPTY_I8, strides, w.edges.copy(), _EMPTY_FACTORS, root, integral)
        if isinstance(w, GeometricPoints):
            return (_kernels.EDGES, _EMPTY_I8, strides, w.distances(), _EMPTY_FACTORS, False, False)
        factors = w.arrays.astype(np.float64)
        return (_kernels.PRODUCT, _EMPTY_I8, strides, _EMPTY_EDGES, factors, False, True)

    @property
    def prunable(self) -> bool:
        """Whether fixing more coordinates can never lower a partial weight."""
        w = self.weights
        if isinstance(w, IndependentTensor):
            return False
        if isinstance(w, ProductArrays):
            return bool(w.arrays.min() >= 1)
        return True

    @cached_property
    def lower_bound(self) -> float:
        """A cheap lower bound on any single vector weight."""
        w = self.weights
        if isinstance(w, IndependentTensor):
            return float(w.weights.min())
        if isinstance(w, ProductArrays):
            return float(np.prod(w.arrays.min(axis=1).astype(np.float64)))
        edges = self.kernel_model[3]
        mins = [edges[i, j].min() for i in range(self.s) for j in range(i + 1, self.s)]
        if isinstance(w, EdgeDecomposable) and w.combiner is Combiner.ROOT_OF_SQUARES:
            return math.sqrt(sum(m * m for m in mins))
        return float(sum(mins))


def _check_rows(rows: np.ndarray, n: int | None = None, s: int | None = None) -> None:
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise DomainError("assignment must be a non-empty list of vectors")
    rn, rs = rows.shape
    if (n is not None and rn != n) or (s is not None and rs != s):
        raise DomainError(f"assignment has shape {rows.shape}, expected {(n, s)}")
    if not np.array_equal(np.sort(rows, axis=0), np.broadcast_to(np.arange(rn)[:, None], rows.shape)):
        raise DomainError("infeasible assignment: some dimension is not a permutation")


@dataclass(frozen=True, eq=False)
class Assignment:
    """A feasible assignment in canonical order (ascending first coordinate).

    ``rows`` is the 0-based ``(n, s)`` array; :attr:`vectors` gives the
    1-based tuples.
    """

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        _check_rows(rows)
        if not np.array_equal(rows[:, 0], np.arange(rows.shape[0])):
            rows = rows[np.argsort(rows[:, 0], kind="stable")]
        object.__setattr__(self, "rows", _readonly(rows))

    @classmethod
    def from_vectors(cls, vectors: Iterable[Sequence[int]]) -> "Assignment":
        return canonicalize(vectors)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def s(self) -> int:
        return self.rows.shape[1]

    @property
    def vectors(self) -> list[tuple[int, ...]]:
        return [tuple(int(x) + 1 for x in r) for r in self.rows]

    def permutation(self, j: int) -> list[int]:
        """pi_j as a 1-based list, for 1-based dimension j."""
        return [int(x) + 1 for x in self.rows[:, j - 1]]

    @cached_property
    def key(self) -> bytes:
        return self.rows.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.rows.shape == other.rows.shape and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Assignment({self.vectors})"


def canonicalize(vectors: Iterable[Sequence[int]]) -> Assignment:
    """Sort 1-based vectors by first coordinate after checking feasibility."""
    rows = np.asarray([tuple(v) for v in vectors], dtype=np.int64)
    if rows.ndim != 2:
        raise DomainError("vectors must all have the same length")
    return Assignment(rows - 1)


def is_feasible(instance: ProblemInstance, a: Assignment) -> bool:
    try:
        _check_rows(np.asarray(a.rows), instance.n, instance.s)
    except DomainError:
        return False
    return True


def vector_weight(instance: ProblemInstance, v: Sequence[int]) -> float:
    """Weight of one 1-based coordinate tuple."""
    if len(v) != instance.s:
        raise DomainError(f"vector has {len(v)} coordinates, expected {instance.s}")
    if any(not 1 <= int(x) <= instance.n for x in v):
        raise DomainError(f"coordinate out of range 1..{instance.n}: {tuple(v)}")
    e = [int(x) - 1 for x in v]
    w = instance.weights
    if isinstance(w, IndependentTensor):
        return float(w.weights[tuple(e)])
    if isinstance(w, ProductArrays):
        return float(math.prod(int(w.arrays[j, e[j]]) for j in range(instance.s)))
    pairs = [(i, j) for i in range(instance.s) for j in range(i + 1, instance.s)]
    if isinstance(w, GeometricPoints):
        lengths = [math.dist(w.points[i, e[i]], w.points[j, e[j]]) for i, j in pairs]
        return math.fsum(lengths)
    lengths = [float(w.edges[i, j, e[i], e[j]]) for i, j in pairs]
    if w.combiner is Combiner.ROOT_OF_SQUARES:
        return math.sqrt(math.fsum(x * x for x in lengths))
    return math.fsum(lengths)


def assignment_weight(instance: ProblemInstance, a: Assignment) -> float:
    _check_rows(np.asarray(a.rows), instance.n, instance.s)
    return float(_kernels.total_weight(instance.kernel_model, a.rows.copy()))


def relative_error(w: float, w_best: float) -> float:
    """Percentage above the best known weight."""
    if w_best == 0:
        raise DomainError("best known weight must be non-zero")
    return (w / w_best - 1.0) * 100.0


def scaled_error(w: float, w_min: float, w_max: float) -> float:
    """Position of ``w`` between ``w_min`` (0%) and ``w_max`` (100%)."""
    if not w_min <= w <= w_max:
        raise DomainError(f"weight {w} outside [{w_min}, {w_max}]")
    if w_max == w_min:
        return 0.0
    return 100.0 * (w - w_min) / (w_max - w_min)
