"""Command line harness: run suites, compare result files, replay a trial.

Exit codes: 0 ok, 1 bad configuration or arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import multiprocessing
import sys

from .kb import KnowledgeError
from .rules import RuleError
from .solver import EngineError
from .suites import (
    SUITES,
    SuiteError,
    compare,
    execute_task,
    scenario_variants,
    suite_plan,
    summarize,
    write_rows,
)
from .world import Scenario, TrialConfig, WorldError, default_scenario, run_trial

STEP_COLUMNS = ["trial", "step", "time", "action_cell", "obs", "max_belief",
                "belief_entropy", "p_not_exist", "queried", "kb_facts"]

_POOL_STATE: dict = {}


def _pool_run(task):
    return execute_task(task, _POOL_STATE["variants"], _POOL_STATE["seed"])


def _load_scenario(path) -> Scenario:
    return Scenario.load(path) if path else default_scenario()


def _cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    plan = suite_plan(args.suite, scenario, args.trials, args.seed)
    variants = scenario_variants(scenario)
    if args.jobs > 1:
        # fork workers inherit the grounded scenario; imap keeps rows in
        # plan order so the CSV matches a single-process run byte for byte
        _POOL_STATE.update(variants=variants, seed=args.seed)
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(args.jobs) as pool:
            rows = pool.imap(_pool_run, plan, chunksize=8)
            count = _write_partial(rows, args.out)
    else:
        rows = (execute_task(t, variants, args.seed) for t in plan)
        count = _write_partial(rows, args.out)
    print(f"{args.suite}: {count} rows -> {args.out}")
    for line in summarize_file(args.out):
        print(line)
    return 0


def _write_partial(rows, out) -> int:
    try:
        return write_rows(rows, out)
    except KeyboardInterrupt:
        print(f"interrupted; partial results flushed to {out}",
              file=sys.stderr)
        raise


def summarize_file(path) -> list:
    from .suites import read_rows
    lines = []
    for entry in summarize(read_rows(path)):
        lines.append(f"  sweep {entry['sweep']:g} {entry['variant']}: "
                     f"n={entry['n']} accuracy={entry['accuracy']:.3f} "
                     f"mean_time={entry['mean_elapsed']:.1f}")
    return lines


def _cmd_compare(args) -> int:
    report = compare(args.table_a, args.table_b, metric=args.metric,
                     n_resamples=args.resamples, seed=args.seed)
    print(f"metric={args.metric}  A={args.table_a}  B={args.table_b}")
    for entry in report:
        star = " *" if entry["p"] < 0.01 else ""
        print(f"  sweep {entry['sweep']:g} {entry['variant']}: "
              f"A={entry['mean_a']:.4f} B={entry['mean_b']:.4f} "
              f"diff={entry['diff']:+.4f} "
              f"ci=[{entry['ci_low']:+.4f}, {entry['ci_high']:+.4f}] "
              f"p={entry['p']:.4f}{star}")
    return 0


def _cmd_trial(args) -> int:
    scenario = _load_scenario(args.scenario)
    tc = TrialConfig(
        percent=args.percent,
        human=not args.no_human,
        tracking=args.tracking,
        present=not args.absent,
    )
    log: list = []
    result = run_trial(scenario, tc, args.seed, args.index,
                       log=log if args.verbose else None)
    if args.verbose:
        print(",".join(STEP_COLUMNS))
        for row in log:
            cells = []
            for col in STEP_COLUMNS:
                v = row[col]
                if isinstance(v, bool):
                    cells.append("1" if v else "0")
                elif isinstance(v, float):
                    cells.append(format(v, ".6g"))
                elif v is None:
                    cells.append("")
                else:
                    cells.append(str(v))
            print(",".join(cells))
    print(f"outcome={result.outcome} correct={int(result.correct)} "
          f"elapsed={result.elapsed} steps={result.steps} "
          f"queries={result.queries} true_room={result.true_room} "
          f"declared={result.declared_room}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim", description="knowledge-driven object search harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment suite")
    run.add_argument("--suite", required=True, choices=sorted(SUITES))
    run.add_argument("--scenario", help="scenario YAML (default: office)")
    run.add_argument("--trials", type=int, default=500)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--jobs", type=int, default=1,
                     help="worker processes (default 1)")
    run.set_defaults(func=_cmd_run)

    cmp_cmd = sub.add_parser("compare", help="bootstrap-compare two runs")
    cmp_cmd.add_argument("table_a")
    cmp_cmd.add_argument("table_b")
    cmp_cmd.add_argument("--metric", default="accuracy")
    cmp_cmd.add_argument("--resamples", type=int, default=10000)
    cmp_cmd.add_argument("--seed", type=int, default=0)
    cmp_cmd.set_defaults(func=_cmd_compare)

    trial = sub.add_parser("trial", help="run one trial, optionally logged")
    trial.add_argument("--seed", type=int, required=True)
    trial.add_argument("--index", type=int, default=0)
    trial.add_argument("--scenario")
    trial.add_argument("--percent", type=float, default=50.0)
    trial.add_argument("--no-human", action="store_true")
    trial.add_argument("--tracking", action="store_true")
    trial.add_argument("--absent", action="store_true")
    trial.add_argument("--verbose", action="store_true")
    trial.set_defaults(func=_cmd_trial)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage errors; fold into the config-error code
        return 1 if err.code else 0
    try:
        return args.func(args)
    except (SuiteError, WorldError, RuleError, KnowledgeError, EngineError,
            FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as err:  # noqa: BLE001 - last-resort runtime report
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
