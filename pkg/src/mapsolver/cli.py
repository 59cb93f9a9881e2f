"""Command line entry point: ``mapsolver {gen,solve,bench,tune,report}``.

Exit codes: 0 success, 1 configuration error, 2 integrity error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench, tuning
from .core import Family
from .errors import ConfigError, DomainError, IntegrityError, ParseError
from .instances import TEST_BED_SIZES, InstanceId, generate, save_instance

log = logging.getLogger("mapsolver")


def _families(text: str) -> tuple[Family, ...]:
    try:
        return tuple(Family.from_code(x.strip()) for x in text.split(",") if x.strip())
    except DomainError as e:
        raise ConfigError(str(e)) from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _sizes(args) -> dict:
    sizes = {s: TEST_BED_SIZES[s] for s in args.s} if args.s else dict(TEST_BED_SIZES)
    if args.n:
        sizes = {s: tuple(n for n in ns if n in args.n) or tuple(args.n) for s, ns in sizes.items()}
    return sizes


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = bench.ExperimentConfig(families=args.families, sizes=_sizes(args), indices=args.indices)
    ids = cfg.instance_ids()
    for iid in ids:
        save_instance(generate(iid), out / f"{iid}.map")
    print(f"wrote {len(ids)} instance files to {out}")
    return 0


def cmd_solve(args) -> int:
    iid = InstanceId(Family.from_code(args.family), args.s, args.n, args.index)
    heuristic = args.heuristic
    cfg = bench.ExperimentConfig(heuristics=(heuristic,), ls_override=args.ls, budgets=(args.tau,))
    cfg.validate()
    rec, best = bench.solve_one(
        iid, heuristic, args.tau, 0, args.ls, args.virtual_clock, args.seed_override
    )
    store = bench.BestKnownStore.load(args.best_known) if args.best_known else bench.BestKnownStore()
    bench.update_best_known(store, str(iid), rec.weight, best)
    rec.best_known = bench.initial_best_known(iid, store)
    if args.best_known:
        store.save(args.best_known)
    text = bench.records_csv([rec])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.print_solution:
        for v in best.vectors:
            print(" ".join(map(str, v)), file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    cfg = bench.ExperimentConfig(
        families=args.families,
        sizes=_sizes(args),
        indices=args.indices,
        budgets=args.budgets,
        heuristics=tuple(args.heuristics.split(",")),
        reps=args.reps,
        workers=args.workers,
        ls_override=args.ls,
        virtual_invocations=args.virtual_clock,
    )
    cfg.validate()
    store = bench.BestKnownStore.load(args.best_known) if args.best_known else bench.BestKnownStore()
    records = bench.run_experiment(cfg, store)
    Path(args.out).write_text(bench.records_csv(records))
    if args.best_known:
        store.save(args.best_known)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_tune(args) -> int:
    grid = tuning.parse_grid(args.grid) if args.grid else tuning.DEFAULT_GRID
    cache_path = Path(args.cache)
    if cache_path.exists() and not args.refresh:
        cache = tuning.ErrorCache.load(cache_path)
        log.info("loaded cache %s", cache_path)
    else:
        cfg = bench.ExperimentConfig(families=args.families, sizes=_sizes(args), indices=args.indices)
        cache = tuning.collect_errors(
            cfg.instance_ids(), args.budgets, args.sizes_m, args.reps, workers=args.workers
        )
        cache.save(cache_path)
    a, b, c, g = tuning.tune(cache, grid)
    print(f"a={a:g} b={b:g} c={c:g} gamma={g:.2f}%")
    for m in cache.sizes:
        print(f"fixed m={m}: gamma={tuning.fixed_gamma(m, cache):.2f}%")
    return 0


def cmd_report(args) -> int:
    with open(args.results, newline="") as f:
        records = bench.read_records(f)
    table = bench.aggregate(records)
    if args.out:
        out = Path(args.out)
        out.with_suffix(".csv").write_text(table.to_csv())
        out.with_suffix(".txt").write_text(table.to_text())
    sys.stdout.write(table.to_text())
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1); argparse's own code 2 means integrity here
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mapsolver", description="Memetic solver and benchmark harness for the MAP.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def bed_args(sp, families="r,cq,sr"):
        sp.add_argument("--families", type=_families, default=_families(families))
        sp.add_argument("--s", type=_ints, default=None, help="dimension counts, e.g. 3,4")
        sp.add_argument("--n", type=_ints, default=None, help="restrict sizes, e.g. 40")
        sp.add_argument("--indices", type=_ints, default=tuple(range(1, 11)))

    g = sub.add_parser("gen", help="write instance files")
    bed_args(g, "r,cq,sr,ge,pr")
    g.add_argument("--out", default="instances")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one heuristic on one instance")
    s.add_argument("--family", required=True)
    s.add_argument("--s", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--index", type=int, default=1)
    s.add_argument("--tau", type=float, default=3.0)
    s.add_argument("--heuristic", default=bench.MEMETIC)
    s.add_argument("--ls", default=None, help="local search code for the memetic run")
    s.add_argument("--seed-override", type=int, default=None)
    s.add_argument("--virtual-clock", type=int, default=None, metavar="INVOCATIONS")
    s.add_argument("--best-known", default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--print-solution", action="store_true")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run the benchmark grid")
    bed_args(b)
    b.add_argument("--budgets", type=_floats, default=bench.DEFAULT_BUDGETS)
    b.add_argument("--heuristics", default=bench.MEMETIC)
    b.add_argument("--ls", default=None)
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--virtual-clock", type=int, default=None, metavar="INVOCATIONS")
    b.add_argument("--best-known", default="best_known.json")
    b.add_argument("--out", default="results.csv")
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("tune", help="fit a, b, c by grid search")
    bed_args(t)
    t.add_argument("--grid", default=None, help="e.g. a=0.02:0.2:0.02,b=0.1:0.6:0.05,c=0.85")
    t.add_argument("--cache", default="error_cache.csv")
    t.add_argument("--refresh", action="store_true", help="re-run experiments even if the cache exists")
    t.add_argument("--budgets", type=_floats, default=(1.0, 3.0, 10.0, 30.0, 100.0))
    t.add_argument("--sizes-m", type=_ints, default=tuning.CANDIDATE_SIZES)
    t.add_argument("--reps", type=int, default=3)
    t.add_argument("--workers", type=int, default=1)
    t.set_defaults(func=cmd_tune)

    r = sub.add_parser("report", help="aggregate a results CSV")
    r.add_argument("results")
    r.add_argument("--out", default=None, help="prefix for .csv and .txt outputs")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except IntegrityError as e:
        print(f"integrity error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, DomainError, ParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
