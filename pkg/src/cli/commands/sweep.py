"""``sweep handle|strip|optimize``: parameter studies written as CSV and JSON."""

import argparse
import logging
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from src.cli.commands import (
    add_surface_args,
    default_handle_points,
    default_strip_points,
    effective_seed,
    input_file,
    load_surface,
    parse_floats,
    parse_ints,
)
from src.cli.commands.optimize import load_run
from src.cli.manifest import RunDirectory, run_arguments
from src.models.run import SweepRecord
from src.services.asymptotics import handle_deficit_sweep, strip_deficit_sweep
from src.services.sweep import optimize_point, sweep
from src.utils.serialization import write_json

logger = logging.getLogger(__name__)


def register(subparsers, parents: Sequence[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("sweep", help="run a parameter sweep")
    which = parser.add_subparsers(dest="study", required=True)

    handle = which.add_parser("handle", parents=list(parents), help="eigenvalue deficits under handle attachment")
    add_surface_args(handle, default_builtin="torus:32")
    handle.add_argument("--n-theta", type=int, default=16)
    handle.add_argument("--k", type=int, default=4)

    strip = which.add_parser("strip", parents=list(parents), help="Steklov deficits under strip attachment")
    add_surface_args(strip, default_builtin="disk:16")
    strip.add_argument("--orientation", choices=["preserve", "reverse"], default="preserve")
    strip.add_argument("--k", type=int, default=3)

    for sub in (handle, strip):
        sub.add_argument("--p", type=int, default=None)
        sub.add_argument("--q", type=int, default=None)
        sub.add_argument("--eps", type=parse_floats, required=True, help="decreasing list, e.g. 0.1,0.05,0.02")
        sub.add_argument("--l", type=float, default=3.0)
        sub.set_defaults(handler=run)

    seeds = which.add_parser("optimize", parents=list(parents), help="repeat an optimize run over seeds")
    seeds.add_argument("config", type=Path)
    seeds.add_argument("--seeds", type=parse_ints, required=True, help="comma-separated seeds")
    seeds.set_defaults(handler=run)


def _seed_sweep(args: argparse.Namespace) -> tuple[SweepRecord, list]:
    cfg = load_run(args.config)
    rows = sweep([{"seed": s} for s in args.seeds], partial(optimize_point, cfg), jobs=args.jobs)
    record = SweepRecord(
        name="optimize",
        parameters={"config": str(args.config), "seeds": list(args.seeds), "objective": cfg.optimizer.objective},
        rows=rows,
    )
    objectives = record.column("objective")
    if objectives.size:
        record.fits["best_objective"] = float(objectives.min())
        record.fits["objective_spread"] = float(np.ptp(objectives))
    return record, [args.config, Path(cfg.run.mesh)]


def run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.study == "optimize":
        record, inputs = _seed_sweep(args)
    else:
        source, m = load_surface(args)
        inputs = [input_file(source)]
        if args.study == "handle":
            p, q = default_handle_points(m, args.p, args.q)
            record = handle_deficit_sweep(m, p, q, args.eps, args.l, args.k, args.n_theta, jobs=args.jobs)
        else:
            p, q = default_strip_points(m, args.p, args.q)
            record = strip_deficit_sweep(m, p, q, args.eps, args.l, args.k, args.orientation, jobs=args.jobs)

    run_dir = RunDirectory(
        f"sweep-{args.study}",
        argv,
        run_arguments(args),
        effective_seed(args),
        inputs=inputs,
        out=args.out,
    )
    run_dir.output("sweep.csv").write_text(record.to_csv(), encoding="utf-8")
    write_json(run_dir.output("sweep.json"), record)
    run_dir.finish()
    failed = len(record.failures)
    logger.info(f"Sweep {record.name}: {len(record.rows) - failed} of {len(record.rows)} points completed")
    print(run_dir.root)
    return 0
