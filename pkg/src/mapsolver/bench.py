"""Experiment harness: timed runs over the benchmark bed, best-known bookkeeping, tables."""

from __future__ import annotations

import csv
import io
import json
import statistics
import threading
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .core import Assignment, Family, assignment_weight, relative_error
from .errors import ConfigError, DomainError, IntegrityError
from .instances import TEST_BED_SIZES, InstanceId, generate
from .localsearch import LOCAL_SEARCH_CODES, default_local_search, greedy_construct, local_search, parse_kind
from .memetic import MemeticParams, VirtualClock, WallClock, run_memetic
from .rng import SubtractiveRng

MEMETIC = "gk"
DEFAULT_BUDGETS = (0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0)
DEFAULT_FAMILIES = (Family.RANDOM, Family.CLIQUE, Family.SQUARE_ROOT)
RESULT_COLUMNS = (
    "instance_id",
    "heuristic",
    "tau_s",
    "weight",
    "best_known",
    "rel_err_pct",
    "generations",
    "pop_size",
    "ls_time_s",
    "elapsed_s",
)
SIZE_CLASSES = ("Small", "Moderate", "Large")
FAMILY_NAMES = {
    Family.RANDOM: "Random",
    Family.CLIQUE: "Clique",
    Family.SQUARE_ROOT: "SquareRoot",
    Family.GEOMETRIC: "Geometric",
    Family.PRODUCT: "Product",
}


@dataclass
class RunRecord:
    instance_id: str
    heuristic: str
    tau_s: float
    weight: float
    best_known: float
    generations: int = 0
    pop_size: int = 0
    ls_time_s: float = 0.0
    elapsed_s: float = 0.0

    @property
    def rel_err_pct(self) -> float:
        return relative_error(self.weight, self.best_known)

    def as_row(self) -> list[str]:
        return [
            self.instance_id,
            self.heuristic,
            _num(self.tau_s),
            _num(self.weight),
            _num(self.best_known),
            f"{self.rel_err_pct:.6f}",
            str(self.generations),
            str(self.pop_size),
            _num(self.ls_time_s),
            _num(self.elapsed_s),
        ]


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def write_records(records, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in records:
        w.writerow(r.as_row())


def records_csv(records) -> str:
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def read_records(stream) -> list[RunRecord]:
    """Parse a results CSV; the stored relative error is ignored and recomputed."""
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
        raise ConfigError(f"results file must have columns {', '.join(RESULT_COLUMNS)}")
    out = []
    for row in reader:
        out.append(
            RunRecord(
                instance_id=row["instance_id"],
                heuristic=row["heuristic"],
                tau_s=float(row["tau_s"]),
                weight=float(row["weight"]),
                best_known=float(row["best_known"]),
                generations=int(row["generations"]),
                pop_size=int(row["pop_size"]),
                ls_time_s=float(row["ls_time_s"]),
                elapsed_s=float(row["elapsed_s"]),
            )
        )
    return out


# best-known store ------------------------------------------------------------


@dataclass
class BestKnownStore:
    """Instance id -> best weight found so far, with an optional certificate."""

    weights: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)  # id -> list of 1-based vectors

    def __post_init__(self):
        self._lock = threading.Lock()

    def get(self, iid: str, default=None):
        return self.weights.get(iid, default)

    @classmethod
    def load(cls, path: str | Path) -> "BestKnownStore":
        path = Path(path)
        if not path.exists():
            return cls()
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
        store = cls()
        for iid, entry in data.items():
            parsed = InstanceId.parse(iid)
            if parsed.family is Family.RANDOM and float(entry["weight"]) < parsed.n:
                raise IntegrityError(f"{path}: {iid} weight {entry['weight']} is below the lower bound {parsed.n}")
            store.weights[iid] = float(entry["weight"])
            if entry.get("certificate"):
                store.certificates[iid] = [tuple(v) for v in entry["certificate"]]
        return store

    def save(self, path: str | Path) -> None:
        data = {}
        for iid in sorted(self.weights):
            entry = {"weight": self.weights[iid]}
            if iid in self.certificates:
                entry["certificate"] = [list(v) for v in self.certificates[iid]]
            data[iid] = entry
        Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def update_best_known(store: BestKnownStore, iid: str, weight: float, certificate=None, instance=None):
    """Record ``weight`` for ``iid`` if it beats the stored value.

    A certificate (assignment or vector list) is checked against a freshly
    generated instance. Random instances cannot go below n.
    """
    parsed = InstanceId.parse(iid)
    weight = float(weight)
    if parsed.family is Family.RANDOM and weight < parsed.n:
        raise IntegrityError(f"{iid}: weight {weight} is below the lower bound {parsed.n}")
    vectors = None
    if certificate is not None:
        inst = instance if instance is not None else generate(parsed)
        try:
            a = certificate if isinstance(certificate, Assignment) else Assignment.from_vectors(certificate)
            actual = assignment_weight(inst, a)
        except DomainError as e:
            raise IntegrityError(f"{iid}: certificate is not a feasible assignment ({e})") from None
        if abs(actual - weight) > 1e-9 * max(1.0, abs(weight)):
            raise IntegrityError(f"{iid}: certificate weighs {actual}, claimed {weight}")
        vectors = a.vectors
    with store._lock:
        old = store.weights.get(iid)
        if old is None or weight < old:
            store.weights[iid] = weight
            if vectors is not None:
                store.certificates[iid] = vectors
            else:
                store.certificates.pop(iid, None)
    return store


def initial_best_known(iid: InstanceId, store: BestKnownStore) -> float | None:
    """Stored best, or n for Random instances (every vector weighs at least 1)."""
    known = store.get(str(iid))
    if iid.family is Family.RANDOM:
        return float(iid.n) if known is None else min(known, float(iid.n))
    return known


# experiments -------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    families: tuple = DEFAULT_FAMILIES
    sizes: dict = field(default_factory=lambda: dict(TEST_BED_SIZES))
    indices: tuple = tuple(range(1, 11))
    budgets: tuple = DEFAULT_BUDGETS
    heuristics: tuple = (MEMETIC,)
    reps: int = 1
    workers: int = 1
    ls_override: str | None = None  # local search used by the memetic runs
    virtual_invocations: int | None = None
    seed_override: int | None = None

    def validate(self) -> None:
        for h in self.heuristics:
            if h != MEMETIC and h not in LOCAL_SEARCH_CODES:
                raise ConfigError(f"unknown heuristic {h!r}; known: {MEMETIC}, {', '.join(LOCAL_SEARCH_CODES)}")
        if self.ls_override is not None and self.ls_override not in LOCAL_SEARCH_CODES:
            raise ConfigError(f"unknown local search {self.ls_override!r}")
        if not self.budgets or any(t <= 0 for t in self.budgets):
            raise ConfigError("budgets must be positive")
        if self.reps < 1 or self.workers < 1:
            raise ConfigError("reps and workers must be positive")
        if self.virtual_invocations is not None and self.virtual_invocations < 1:
            raise ConfigError("virtual clock budget must be positive")

    def instance_ids(self) -> list[InstanceId]:
        return [
            InstanceId(f, s, n, i)
            for f in self.families
            for s in sorted(self.sizes)
            for n in self.sizes[s]
            for i in self.indices
        ]


def run_seed(iid: InstanceId, heuristic: str, tau: float, rep: int) -> int:
    return zlib.crc32(f"{iid}|{heuristic}|{tau!r}|{rep}".encode()) & 0x7FFFFFFF


def solve_one(
    iid: InstanceId,
    heuristic: str,
    tau: float,
    rep: int = 0,
    ls_override: str | None = None,
    virtual_invocations: int | None = None,
    seed_override: int | None = None,
) -> tuple[RunRecord, Assignment]:
    """One run; the record's best_known is left at the achieved weight."""
    inst = generate(iid)
    if heuristic == MEMETIC:
        ls = parse_kind(ls_override) if ls_override else default_local_search(iid.family)
        seed = seed_override if seed_override is not None else run_seed(iid, heuristic, tau, rep)
        params = MemeticParams(tau=tau)
        clock = VirtualClock(virtual_invocations, tau) if virtual_invocations else WallClock(tau)
        best, stats = run_memetic(inst, params, ls, SubtractiveRng(seed), clock)
        w = assignment_weight(inst, best)
        rec = RunRecord(str(iid), heuristic, tau, w, w, stats.generations, stats.pop_size, stats.t, stats.elapsed)
        return rec, best
    t0 = time.perf_counter()
    best = local_search(inst, greedy_construct(inst), parse_kind(heuristic))
    dt = time.perf_counter() - t0
    if virtual_invocations:
        dt = tau / virtual_invocations
    w = assignment_weight(inst, best)
    return RunRecord(str(iid), heuristic, tau, w, w, 0, 1, dt, dt), best


def _solve_task(args):
    rec, best = solve_one(*args)
    return rec, best.vectors


def run_experiment(config: ExperimentConfig, store: BestKnownStore | None = None) -> list[RunRecord]:
    """Every instance x heuristic x budget x rep; updates ``store`` with improvements.

    Standalone local searches ignore the budget, so they run once per instance
    and rep and are recorded under every budget. Records carry the final
    best-known values.
    """
    config.validate()
    store = store if store is not None else BestKnownStore()
    tasks, keys = [], []
    for iid in config.instance_ids():
        for h in config.heuristics:
            for rep in range(config.reps):
                taus = config.budgets if h == MEMETIC else config.budgets[:1]
                for tau in taus:
                    tasks.append(
                        (iid, h, float(tau), rep, config.ls_override, config.virtual_invocations, config.seed_override)
                    )
                    keys.append((iid, h, rep))
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            results = list(ex.map(_solve_task, tasks))
    else:
        results = [_solve_task(t) for t in tasks]

    records = []
    for (iid, h, rep), (rec, vectors) in zip(keys, results):
        update_best_known(store, rec.instance_id, rec.weight, vectors)
        if h == MEMETIC:
            records.append(rec)
        else:
            for tau in config.budgets:
                records.append(RunRecord(**{**rec.__dict__, "tau_s": float(tau)}))
    for rec in records:
        iid = InstanceId.parse(rec.instance_id)
        rec.best_known = initial_best_known(iid, store)
    return records


# aggregation -----------------------------------------------------------------


@dataclass
class SummaryTable:
    """Mean relative error per row label and (heuristic, budget) column.

    ``best`` marks, per row and budget, the columns holding the minimum.
    """

    columns: list
    rows: list  # (label, {column: value})
    best: dict = field(default_factory=dict)  # (label, column) -> bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row"] + [f"{h}@{_num(t)}" for h, t in self.columns])
        for label, vals in self.rows:
            w.writerow([label] + [("" if c not in vals else f"{vals[c]:.2f}") for c in self.columns])
        return buf.getvalue()

    def to_text(self) -> str:
        head = ["row"] + [f"{h} {_num(t)}s" for h, t in self.columns]
        body = []
        for label, vals in self.rows:
            cells = [label]
            for c in self.columns:
                if c not in vals:
                    cells.append("")
                else:
                    cells.append(f"{vals[c]:.2f}" + ("*" if self.best.get((label, c)) else ""))
            body.append(cells)
        widths = [max(len(r[k]) for r in [head] + body) for k in range(len(head))]
        lines = []
        for r in [head] + body:
            lines.append("  ".join(r[0].ljust(widths[0]) if k == 0 else x.rjust(widths[k]) for k, x in enumerate(r)))
        return "\n".join(lines) + "\n"


def _size_class(iid: InstanceId) -> str | None:
    sizes = TEST_BED_SIZES.get(iid.s)
    if sizes and iid.n in sizes:
        return SIZE_CLASSES[sizes.index(iid.n)]
    return None


def aggregate(records) -> SummaryTable:
    """Instance-class rows (mean over indices and reps) followed by average rows."""
    records = list(records)
    if not records:
        return SummaryTable([], [])
    columns = sorted({(r.heuristic, r.tau_s) for r in records}, key=lambda c: (c[1], c[0]))
    cells: dict = {}
    ids = {}
    for r in records:
        iid = InstanceId.parse(r.instance_id)
        cls = (iid.family, iid.s, iid.n)
        ids[cls] = iid
        cells.setdefault(cls, {}).setdefault((r.heuristic, r.tau_s), []).append(r.rel_err_pct)

    family_order = list(Family)
    classes = sorted(cells, key=lambda k: (family_order.index(k[0]), k[1], k[2]))
    class_rows = []
    for cls in classes:
        vals = {c: statistics.fmean(v) for c, v in cells[cls].items()}
        class_rows.append((ids[cls].name, cls, vals))

    def avg(label, members):
        vals = {}
        for c in columns:
            xs = [v[c] for _, _, v in members if c in v]
            if xs:
                vals[c] = statistics.fmean(xs)
        return (label, vals)

    rows = [(label, vals) for label, _, vals in class_rows]
    rows.append(avg("All avg.", class_rows))
    for f in family_order:
        members = [r for r in class_rows if r[1][0] is f]
        if members:
            rows.append(avg(f"{FAMILY_NAMES[f]} avg.", members))
    for s in sorted({r[1][1] for r in class_rows}):
        rows.append(avg(f"{s}-AP avg.", [r for r in class_rows if r[1][1] == s]))
    for k, name in enumerate(SIZE_CLASSES):
        members = [r for r in class_rows if _size_class(ids[r[1]]) == name]
        if members:
            rows.append(avg(f"{name} avg.", members))

    best = {}
    for label, vals in rows:
        for tau in sorted({t for _, t in columns}):
            present = [c for c in columns if c[1] == tau and c in vals]
            if not present:
                continue
            low = min(vals[c] for c in present)
            for c in present:
                best[(label, c)] = vals[c] == low
    return SummaryTable(columns, rows, best)
