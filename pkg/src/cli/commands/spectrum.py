"""``spectrum``: solve one Laplace or Steklov eigenproblem."""

import argparse
import logging
from typing import Sequence

from src.cli.commands import (
    add_surface_args,
    density_for,
    effective_seed,
    input_file,
    load_surface,
    spectrum_document,
)
from src.cli.manifest import RunDirectory, run_arguments
from src.models.spectrum import ProblemKind
from src.services.eigensolver import METHODS, solve
from src.services.fem import assemble
from src.utils.serialization import write_json, write_sidecar

logger = logging.getLogger(__name__)

SIDECAR_NAME = "eigenvectors.bin"


def register(subparsers, parents: Sequence[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "spectrum", parents=list(parents), help="first k eigenpairs of a surface"
    )
    add_surface_args(parser)
    parser.add_argument("--density", default="uniform", help="uniform, area, boundary or a JSON path")
    parser.add_argument("--kind", choices=[k.value for k in ProblemKind], default="laplace")
    parser.add_argument("--k", type=int, default=4, help="number of nonzero eigenvalues")
    parser.add_argument("--method", choices=METHODS, default="auto")
    parser.add_argument(
        "--vectors", action="store_true", help=f"also write eigenvectors to {SIDECAR_NAME}"
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    kind = ProblemKind(args.kind)
    source, m = load_surface(args)
    beta = density_for(m, args.density, kind)
    seed = effective_seed(args)
    run_dir = RunDirectory(
        "spectrum",
        argv,
        run_arguments(args),
        seed,
        inputs=[input_file(source), input_file(args.density)],
        out=args.out,
    )

    s = solve(assemble(m, beta, kind), args.k, method=args.method, seed=seed)
    logger.info(f"Solved {s.summary()}")
    doc = spectrum_document(source, args.density, s)
    if args.vectors:
        shape = write_sidecar(run_dir.output(SIDECAR_NAME), s.eigenvectors)
        doc["vectors"] = {"file": SIDECAR_NAME, "shape": list(shape), "dtype": "<f8", "order": "C"}
    write_json(run_dir.output("spectrum.json"), doc)
    run_dir.finish()
    print(run_dir.root)
    return 0
