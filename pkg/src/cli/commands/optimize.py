"""``optimize``: run the density/conformal descent described by a TOML file."""

import argparse
import logging
from pathlib import Path
from typing import Sequence

from src.cli.commands import input_file
from src.cli.manifest import RunDirectory, run_arguments
from src.models.run import RunFile
from src.services.builtin_surfaces import surface_from_source
from src.services.optimizer import initial_density, minimize_E
from src.utils.serialization import JsonLinesWriter, write_json

logger = logging.getLogger(__name__)


def register(subparsers, parents: Sequence[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "optimize", parents=list(parents), help="optimize an eigenvalue functional"
    )
    parser.add_argument("config", type=Path, help="run file (TOML)")
    parser.add_argument("--dry-run", action="store_true", help="validate inputs without solving")
    parser.set_defaults(handler=run)


def _relative_to_config(source: str, config: Path) -> str:
    """Relative mesh and density paths are looked up next to the config first."""
    candidate = config.parent / source
    if not Path(source).is_absolute() and candidate.is_file():
        return str(candidate)
    return source


def load_run(config: Path, seed=None) -> RunFile:
    run = RunFile.from_toml(config)
    updates = {
        "mesh": _relative_to_config(run.run.mesh, config),
        "density": _relative_to_config(run.run.density, config),
    }
    if seed is not None:
        updates["seed"] = int(seed)
    return run.model_copy(update={"run": run.run.model_copy(update=updates)})


def run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    cfg = load_run(args.config, args.seed)
    seed = cfg.run.seed
    m = surface_from_source(cfg.run.mesh)
    init = initial_density(m, cfg)
    run_dir = RunDirectory(
        "optimize",
        argv,
        run_arguments(args) | {"run": cfg.model_dump(mode="json")},
        seed,
        inputs=[args.config, input_file(cfg.run.mesh), input_file(cfg.run.density)],
        out=args.out,
        config_path=args.config,
    )
    write_json(run_dir.output("config.json"), cfg.model_dump(mode="json"))
    if args.dry_run:
        logger.info(
            f"Dry run: {m.n_vertices} vertices, objective {cfg.optimizer.objective}, "
            f"{cfg.optimizer.max_iterations} iterations allowed"
        )
        run_dir.finish()
        print(run_dir.root)
        return 0

    with JsonLinesWriter(run_dir.output("history.jsonl")) as history:
        result = minimize_E(m, cfg.optimizer, init, seed=seed, callback=history.write)
    write_json(run_dir.output("density.json"), result.final_density)
    s = result.final_spectrum
    write_json(
        run_dir.output("result.json"),
        {
            "mesh": cfg.run.mesh,
            "density": "density.json",
            "kind": s.kind.value,
            "k": s.k,
            **result.to_dict(),
        },
    )
    run_dir.finish()
    logger.info(
        f"Optimization {result.termination.value}: objective {result.objective:.8g}, "
        f"lambda_bar_1 {s.normalized()[1]:.8g}"
    )
    print(run_dir.root)
    return 0
