"""Command-line entry point: ``chipletplan <subcommand> ...``.

Exit status is 0 on success, 2 for usage errors, 3 for a rejected spec or
configuration, 4 for an unreadable table or checkpoint file, 5 when the
solver or the instance cannot produce a result and 6 for I/O failures.
"""
import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ChipletPlanError, ConfigurationError, InstanceError, NumericalError,
                     TableFormatError)

log = logging.getLogger("chipletplan")

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_TABLES = 4
EXIT_SOLVE = 5
EXIT_IO = 6

SUMMARY_COLUMNS = ("reward", "wirelength_mm", "max_temperature_k", "backend")


def _threads():
    raw = os.environ.get("CHIPLETPLAN_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"CHIPLETPLAN_THREADS must be an integer, got {raw!r}")


def _spec(path):
    from .io import load_system_spec

    return load_system_spec(path)


def _tables(path, spec):
    from .io import load_tables
    from .thermal_reference import characterize_tables

    if path:
        return load_tables(path, spec)
    log.info("no --tables given; characterising the spec's grid")
    return characterize_tables(spec.thermal_grid, workers=_threads())


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_result(out, floorplan, spec, tables, summary):
    from .fast_thermal import evaluate_temperatures
    from .io import render_svg, write_csv, write_floorplan

    write_floorplan(out / "floorplan.csv", floorplan, spec)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, [summary])
    render_svg(floorplan, spec, evaluate_temperatures(floorplan, spec, tables),
               out / "floorplan.svg")


# ---------------------------------------------------------------- subcommands

def cmd_gen(args):
    from .io import generate_synthetic, serialize_system_spec

    text = serialize_system_spec(generate_synthetic(args.chiplets, args.seed))
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def cmd_characterize(args):
    from .io import persist_tables
    from .thermal_reference import characterize_tables

    spec = _spec(args.spec)
    persist_tables(characterize_tables(spec.thermal_grid, workers=_threads()), args.out)


def cmd_evaluate(args):
    from .floorplan_env import random_floorplan
    from .io import read_floorplan, write_csv
    from .reward import evaluate_floorplan

    spec = _spec(args.spec)
    tables = None if args.reference else _tables(args.tables, spec)
    if args.floorplan:
        fp = read_floorplan(args.floorplan, spec)
    else:
        fp = random_floorplan(spec, np.random.default_rng(args.seed))
        if fp is None:
            raise InstanceError("could not sample a legal floorplan")
    res = evaluate_floorplan(fp, spec, tables, reference=args.reference)
    row = (res.reward, res.wirelength, res.temperature,
           "reference" if args.reference else "fast")
    write_csv(args.out, SUMMARY_COLUMNS, [row])


def cmd_train(args):
    from .agent import TrainConfig, train
    from .agent.train import METRIC_COLUMNS
    from .budget import WorkClock
    from .io import save_checkpoint, write_csv

    spec = _spec(args.spec)
    tables = _tables(args.tables, spec)
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed, rnd_enabled=not args.no_rnd)
    clock = WorkClock(args.budget_seconds)
    res = train(spec, tables, train_cfg=cfg, clock=clock)
    out = _out_dir(args.out)
    write_csv(out / "metrics.csv", METRIC_COLUMNS, res.metrics)
    agent = res.agent
    save_checkpoint(out / "checkpoint.npz", agent.params, agent.rnd.predictor,
                    agent.rnd.stats.state(), len(res.metrics))
    if res.best_floorplan is None:
        raise InstanceError("training never completed a floorplan")
    _write_result(out, res.best_floorplan, spec, tables,
                  (res.best_reward, res.best_wirelength, res.best_temperature, "fast"))


def cmd_anneal(args):
    from .annealer import TRACE_COLUMNS, AnnealConfig, anneal
    from .budget import WorkClock
    from .io import write_csv

    spec = _spec(args.spec)
    if args.iterations is None and args.budget_seconds is None:
        raise ConfigurationError("give --iterations, --budget-seconds or both")
    tables = _tables(args.tables, spec)
    cfg = AnnealConfig(iterations=args.iterations, seed=args.seed, backend=args.backend)
    clock = WorkClock(args.budget_seconds)
    res = anneal(spec, cfg=cfg, tables=tables, clock=clock)
    out = _out_dir(args.out)
    write_csv(out / "trace.csv", TRACE_COLUMNS, res.trace)
    _write_result(out, res.best_floorplan, spec, tables,
                  (res.reward, res.wirelength, res.temperature, args.backend))


def cmd_compare(args):
    from .compare import METHODS, REPORT_COLUMNS, compare, synthetic_systems
    from .io import write_csv

    systems = [(Path(p).stem, _spec(p)) for p in args.spec or ()]
    if args.synthetic:
        systems += synthetic_systems(args.synthetic, args.synthetic_seed)
    if not systems:
        raise ConfigurationError("give at least one --spec or --synthetic K")
    names = [n for n, _ in systems]
    if len(set(names)) != len(names):
        raise ConfigurationError("system names (spec file stems) must be unique")
    methods = tuple(args.methods.split(",")) if args.methods else METHODS
    reports = compare(systems, args.budget_seconds, args.seeds, methods,
                      workers=args.workers or _threads())
    write_csv(args.out, REPORT_COLUMNS, [r.row() for r in reports])


# ---------------------------------------------------------------- parser

def _seed_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def exit_code(exc):
    if isinstance(exc, TableFormatError):
        return EXIT_TABLES
    if isinstance(exc, (NumericalError, InstanceError)):
        return EXIT_SOLVE
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_CONFIG


def build_parser():
    p = argparse.ArgumentParser(prog="chipletplan",
                                description="Thermal-aware chiplet floorplanning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="write a synthetic system spec")
    s.add_argument("--chiplets", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("characterize", help="build resistance tables for a spec's grid")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_characterize)

    s = sub.add_parser("evaluate", help="score a floorplan (random one if none given)")
    s.add_argument("--spec", required=True)
    s.add_argument("--tables")
    s.add_argument("--floorplan", help="CSV with name,ix,iy rows")
    s.add_argument("--reference", action="store_true", help="use the finite-difference solver")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("train", help="train the PPO agent on one system")
    s.add_argument("--spec", required=True)
    s.add_argument("--tables")
    s.add_argument("--epochs", type=int, default=600)
    s.add_argument("--budget-seconds", type=float)
    s.add_argument("--no-rnd", action="store_true", help="disable the exploration bonus")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("anneal", help="simulated-annealing baseline")
    s.add_argument("--spec", required=True)
    s.add_argument("--tables")
    s.add_argument("--backend", choices=("fast", "reference"), default="fast")
    s.add_argument("--budget-seconds", type=float)
    s.add_argument("--iterations", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_anneal)

    s = sub.add_parser("compare", help="all methods under one budget")
    s.add_argument("--spec", action="append", help="system spec (repeatable)")
    s.add_argument("--synthetic", type=int, default=0, help="add K generated systems")
    s.add_argument("--synthetic-seed", type=int, default=0)
    s.add_argument("--budget-seconds", type=float, required=True)
    s.add_argument("--seeds", type=_seed_list, default=[0])
    s.add_argument("--methods", help="comma-separated subset of rl_rnd,rl,sa_reference,sa_fast")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (ChipletPlanError, OSError) as exc:
        print(f"chipletplan {args.command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
