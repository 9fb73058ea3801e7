"""Command-line interface: ``cbmai <command> ...``.

Exit codes: 0 success, 1 usage error, 2 instance validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import catalog, hardness, harness
from .algorithms import ALGORITHMS, BudgetError
from .model import AssumptionError, Instance, InstanceError, load_instance, save_instance, true_optimum

EXIT_USAGE = 1
EXIT_INSTANCE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_instance(ref: str) -> Instance:
    """A built-in name or a path to an instance JSON file."""
    if ref in catalog.BUILTIN_NAMES:
        return catalog.builtin_instance(ref)
    path = Path(ref)
    if not path.exists():
        raise InstanceError(f"{ref!r} is neither a built-in instance ({', '.join(catalog.BUILTIN_NAMES)}) nor a file")
    try:
        return load_instance(path)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{ref}: invalid JSON ({exc})") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _algo_list(text: str) -> list[str]:
    algos = [v.strip() for v in text.split(",") if v.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {', '.join(ALGORITHMS)}")
    return algos


def _dump(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_solve(args) -> int:
    inst = resolve_instance(args.instance_ref)
    opt = true_optimum(inst)
    _dump({
        "instance": inst.name,
        "feasible": opt.feasible,
        "basis": list(opt.basis) if opt.feasible else None,
        "arm_support": list(opt.arm_support(inst.num_arms)),
        "value": opt.value,
        "x": opt.x.tolist() if opt.x is not None else None,
        "assumption_ok": opt.assumption_ok,
        "notes": list(opt.notes),
    })
    return 0


def _run_cells(inst, algos, budgets, args) -> list[harness.CellResult]:
    try:
        spec = harness.ExperimentSpec(inst, tuple(algos), tuple(budgets), args.trials, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return harness.run_trials(spec, jobs=args.jobs, force=args.force)


def cmd_run(args) -> int:
    inst = resolve_instance(args.instance)
    results = _run_cells(inst, [args.algo], [args.budget], args)
    for r in results:
        print(
            f"{r.instance} {r.algorithm} N={r.budget}: {r.errors}/{r.trials} errors, "
            f"error rate {r.error_rate:.4f} (95% CI {r.ci_low:.4f}..{r.ci_high:.4f})"
        )
    return 0


def cmd_sweep(args) -> int:
    inst = resolve_instance(args.instance)
    results = _run_cells(inst, args.algos, args.budgets, args)
    harness.write_csv(results, args.out)
    for r in results:
        print(f"{r.algorithm:8s} N={r.budget:<7d} error rate {r.error_rate:.4f} [{r.ci_low:.4f}, {r.ci_high:.4f}]")
    print(f"wrote {len(results)} rows to {args.out}")
    return 0


def _progress(done, total):
    if done % 100 == 0 or done == total:
        print(f"  bases {done}/{total}", file=sys.stderr)


def cmd_gaps(args) -> int:
    inst = resolve_instance(args.instance)
    report = hardness.gap_report(inst, restarts=args.restarts, seed=args.seed,
                                 progress=_progress if args.verbose else None)
    _dump({"instance": inst.name, **report.to_dict()})
    return 0


def cmd_bounds(args) -> int:
    inst = resolve_instance(args.instance)
    report = hardness.gap_report(inst, restarts=args.restarts, seed=args.seed,
                                 progress=_progress if args.verbose else None)
    bounds = hardness.rate_bounds(inst, report)
    _dump({
        "instance": inst.name,
        "delta0_sq": hardness.json_number(report.delta0_sq),
        "sorted_gaps": [hardness.json_number(v) for v in report.sorted_gaps],
        **bounds.to_dict(),
    })
    return 0


def cmd_instance(args) -> int:
    ref = args.source
    if ref in catalog.BUILTIN_NAMES:
        inst = catalog.builtin_instance(ref)
    else:
        path = Path(ref)
        if not path.exists():
            raise InstanceError(f"{ref!r} is neither a built-in instance nor a generator spec file")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{ref}: invalid JSON ({exc})") from None
        if "kind" in data:
            try:
                spec = catalog.spec_from_dict(data)
            except (TypeError, ValueError) as exc:
                raise InstanceError(f"bad generator spec: {exc}") from None
            seed = data.get("seed", args.seed)
            inst = catalog.generate(spec, np.random.default_rng(seed), name=data.get("name"))
        else:
            inst = Instance.from_dict(data)
    if args.out:
        save_instance(inst, args.out)
    else:
        _dump(inst.to_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbmai", description="Constrained best mixed arm identification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the true-mean LP and check uniqueness")
    p.add_argument("instance_ref", metavar="instance")
    p.set_defaults(func=cmd_solve)

    def experiment_flags(p):
        p.add_argument("--instance", required=True)
        p.add_argument("--trials", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--force", action="store_true", help="run even if the uniqueness check fails")

    p = sub.add_parser("run", help="error rate of one algorithm at one budget")
    experiment_flags(p)
    p.add_argument("--algo", required=True, choices=ALGORITHMS)
    p.add_argument("--budget", type=int, required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="error rates over algorithms x budgets, written as CSV")
    experiment_flags(p)
    p.add_argument("--budgets", type=_int_list, required=True)
    p.add_argument("--algos", type=_algo_list, default=list(ALGORITHMS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    for name, func, help_text in (
        ("gaps", cmd_gaps, "estimate every basis/arm gap and the infeasibility gap"),
        ("bounds", cmd_bounds, "rate exponents implied by the estimated gaps"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--instance", required=True)
        p.add_argument("--restarts", type=int, default=hardness.RESTARTS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("instance", help="write a built-in or generated instance as JSON")
    p.add_argument("source", help="built-in name or generator spec JSON file")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0, help="generator seed if the spec has none")
    p.set_defaults(func=cmd_instance)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, BudgetError) as exc:
        print(f"cbmai: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, AssumptionError, catalog.GenerationError) as exc:
        print(f"cbmai: invalid instance: {exc}", file=sys.stderr)
        return EXIT_INSTANCE


if __name__ == "__main__":
    sys.exit(main())
