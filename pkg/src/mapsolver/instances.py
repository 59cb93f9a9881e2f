"""Seeded benchmark instances and their text file format.

Each instance is generated from ``SubtractiveRng(s + n + index)``. The draw
order is fixed per family:

* Random: one weight per vector, vectors in lexicographic order;
* Clique / SquareRoot: edge matrices for dimension pairs (i, j), i < j, in
  lexicographic pair order, each matrix row-major;
* Geometric: for each dimension, n points, x then y;
* Product: for each dimension, n factors.

All values are uniform integers from {1, ..., 100}.

File layout::

    MAP <family-code> <s> <n> <seed>
    <model tag>            # tensor | edges sum | edges sqrt | points | product
    <values in draw order>
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .core import (
    Combiner,
    EdgeDecomposable,
    Family,
    GeometricPoints,
    IndependentTensor,
    ProblemInstance,
    ProductArrays,
)
from .errors import DomainError, ParseError
from .rng import SubtractiveRng

WEIGHT_LO, WEIGHT_HI = 1, 101

# small / moderate / large n per dimension count
TEST_BED_SIZES = {3: (40, 70, 100), 4: (20, 30, 40), 5: (15, 18, 25), 6: (12, 15, 18)}
INDICES = tuple(range(1, 11))

_MODEL_TAGS = {
    Family.RANDOM: "tensor",
    Family.CLIQUE: "edges sum",
    Family.SQUARE_ROOT: "edges sqrt",
    Family.GEOMETRIC: "points",
    Family.PRODUCT: "product",
}

_ID_RE = re.compile(r"^(\d+)(r|cq|sr|ge|pr)(\d+)-(\d+)$")


@dataclass(frozen=True, order=True)
class InstanceId:
    family: Family
    s: int
    n: int
    index: int

    @property
    def seed(self) -> int:
        return self.s + self.n + self.index

    @property
    def name(self) -> str:
        return f"{self.s}{self.family.code}{self.n}"

    def __str__(self) -> str:
        return f"{self.name}-{self.index}"

    @classmethod
    def parse(cls, text: str) -> "InstanceId":
        m = _ID_RE.match(text.strip())
        if not m:
            raise DomainError(f"cannot parse instance id {text!r}")
        s, code, n, index = m.groups()
        return cls(Family.from_code(code), int(s), int(n), int(index))


def benchmark_ids(families=(Family.RANDOM, Family.CLIQUE, Family.SQUARE_ROOT), indices=INDICES):
    """All instance ids of the benchmark bed for the given families."""
    return [
        InstanceId(f, s, n, i)
        for f in families
        for s, sizes in TEST_BED_SIZES.items()
        for n in sizes
        for i in indices
    ]


def _edge_matrices(rng: SubtractiveRng, s: int, n: int) -> np.ndarray:
    edges = np.zeros((s, s, n, n))
    for i in range(s):
        for j in range(i + 1, s):
            edges[i, j] = rng.ints(WEIGHT_LO, WEIGHT_HI, n * n).reshape(n, n)
    return edges


def generate(iid: InstanceId) -> ProblemInstance:
    family, s, n = iid.family, iid.s, iid.n
    if s < 2 or n < 1:
        raise DomainError(f"need s >= 2 and n >= 1, got s={s} n={n}")
    rng = SubtractiveRng(iid.seed)
    if family is Family.RANDOM:
        weights = IndependentTensor(rng.ints(WEIGHT_LO, WEIGHT_HI, n**s).astype(np.int8).reshape((n,) * s))
    elif family is Family.CLIQUE:
        weights = EdgeDecomposable(_edge_matrices(rng, s, n), Combiner.SUM)
    elif family is Family.SQUARE_ROOT:
        weights = EdgeDecomposable(_edge_matrices(rng, s, n), Combiner.ROOT_OF_SQUARES)
    elif family is Family.GEOMETRIC:
        weights = GeometricPoints(rng.ints(WEIGHT_LO, WEIGHT_HI, s * n * 2).reshape(s, n, 2))
    elif family is Family.PRODUCT:
        weights = ProductArrays(rng.ints(WEIGHT_LO, WEIGHT_HI, s * n).reshape(s, n))
    else:
        raise DomainError(f"unsupported family {family!r}")
    return ProblemInstance(s=s, n=n, family=family, weights=weights, index=iid.index, seed=iid.seed)


def _fmt(values: np.ndarray) -> str:
    if values.dtype.kind in "iub":
        return " ".join(str(int(x)) for x in values)
    return " ".join(str(int(x)) if float(x).is_integer() else repr(float(x)) for x in values)


def write_instance(instance: ProblemInstance) -> bytes:
    s, n = instance.s, instance.n
    out = io.StringIO()
    out.write(f"MAP {instance.family.code} {s} {n} {instance.seed}\n")
    out.write(_MODEL_TAGS[instance.family] + "\n")
    w = instance.weights
    if isinstance(w, IndependentTensor):
        for row in w.weights.reshape(-1, n):
            out.write(_fmt(row) + "\n")
    elif isinstance(w, EdgeDecomposable):
        for i in range(s):
            for j in range(i + 1, s):
                for row in w.edges[i, j]:
                    out.write(_fmt(row) + "\n")
    elif isinstance(w, GeometricPoints):
        for pts in w.points:
            for p in pts:
                out.write(_fmt(p) + "\n")
    else:
        for row in w.arrays:
            out.write(_fmt(row) + "\n")
    return out.getvalue().encode("ascii")


def _token_offset(data: bytes, start: int, k: int) -> int:
    """Byte offset of the k-th whitespace-separated token at or after ``start``."""
    for i, m in enumerate(re.finditer(rb"\S+", data[start:])):
        if i == k:
            return start + m.start()
    return len(data)


def read_instance(stream: bytes | BinaryIO) -> ProblemInstance:
    data = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    data = bytes(data)
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("missing header line", len(data))
    header = data[:nl].split()
    if len(header) != 5 or header[0] != b"MAP":
        raise ParseError("header must be 'MAP <family> <s> <n> <seed>'", 0)
    try:
        family = Family.from_code(header[1].decode("ascii"))
    except (DomainError, UnicodeDecodeError):
        raise ParseError(f"unknown family code {header[1]!r}", data.find(header[1])) from None
    try:
        s, n, seed = (int(x) for x in header[2:])
    except ValueError:
        raise ParseError("non-integer s, n or seed in header", 0) from None
    if s < 2 or n < 1:
        raise ParseError(f"invalid sizes s={s} n={n}", 0)

    tag_start = nl + 1
    nl2 = data.find(b"\n", tag_start)
    if nl2 < 0:
        raise ParseError("missing model tag line", len(data))
    tag = data[tag_start:nl2].decode("ascii", "replace").strip()
    if tag != _MODEL_TAGS[family]:
        raise ParseError(f"model tag {tag!r} does not match family {family.code!r}", tag_start)

    body_start = nl2 + 1
    tokens = data[body_start:].split()
    expected = {
        Family.RANDOM: n**s,
        Family.CLIQUE: s * (s - 1) // 2 * n * n,
        Family.SQUARE_ROOT: s * (s - 1) // 2 * n * n,
        Family.GEOMETRIC: s * n * 2,
        Family.PRODUCT: s * n,
    }[family]
    if len(tokens) < expected:
        raise ParseError(f"truncated payload: {len(tokens)} of {expected} values", len(data))
    if len(tokens) > expected:
        raise ParseError("trailing data after payload", _token_offset(data, body_start, expected))
    try:
        values = np.array(tokens).astype(np.float64)
    except ValueError:
        for k, tok in enumerate(tokens):
            try:
                float(tok)
            except ValueError:
                raise ParseError(f"bad number {tok!r}", _token_offset(data, body_start, k)) from None
        raise
    bad = np.flatnonzero(~np.isfinite(values) | (values < 0))
    if bad.size:
        raise ParseError("weights must be finite and non-negative", _token_offset(data, body_start, int(bad[0])))

    if family is Family.RANDOM:
        if values.max() > 127 or not np.all(values == np.round(values)):
            raise ParseError("tensor weights must be integers in 0..127", body_start)
        weights = IndependentTensor(values.astype(np.int8).reshape((n,) * s))
    elif family in (Family.CLIQUE, Family.SQUARE_ROOT):
        edges = np.zeros((s, s, n, n))
        k = 0
        for i in range(s):
            for j in range(i + 1, s):
                edges[i, j] = values[k : k + n * n].reshape(n, n)
                k += n * n
        comb = Combiner.SUM if family is Family.CLIQUE else Combiner.ROOT_OF_SQUARES
        weights = EdgeDecomposable(edges, comb)
    elif family is Family.GEOMETRIC:
        weights = GeometricPoints(values.reshape(s, n, 2))
    else:
        if not np.all(values == np.round(values)):
            raise ParseError("product factors must be integers", body_start)
        weights = ProductArrays(values.astype(np.int64).reshape(s, n))
    return ProblemInstance(s=s, n=n, family=family, weights=weights, index=seed - s - n, seed=seed)


def save_instance(instance: ProblemInstance, path: str | Path) -> None:
    Path(path).write_bytes(write_instance(instance))


def load_instance(path: str | Path) -> ProblemInstance:
    return read_instance(Path(path).read_bytes())


def instances_equal(a: ProblemInstance, b: ProblemInstance) -> bool:
    """Structural equality of two instances (same family, sizes, seed, weights)."""
    if (a.family, a.s, a.n, a.seed) != (b.family, b.s, b.n, b.seed):
        return False
    wa, wb = a.weights, b.weights
    if type(wa) is not type(wb):
        return False
    if isinstance(wa, IndependentTensor):
        return np.array_equal(wa.weights, wb.weights)
    if isinstance(wa, EdgeDecomposable):
        return wa.combiner == wb.combiner and np.array_equal(wa.edges, wb.edges)
    if isinstance(wa, GeometricPoints):
        return np.array_equal(wa.points, wb.points)
    return np.array_equal(wa.arrays, wb.arrays)
