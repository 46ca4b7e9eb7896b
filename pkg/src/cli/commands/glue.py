"""``glue handle|strip``: attach a thin handle or strip and write the result."""

import argparse
import logging
from typing import Sequence

from src.cli.commands import (
    add_surface_args,
    default_handle_points,
    default_strip_points,
    effective_seed,
    input_file,
    load_surface,
)
from src.cli.manifest import RunDirectory, run_arguments
from src.services.mesh_io import save_mesh, to_canonical_json
from src.services.surgery import attach_handle, attach_strip
from src.utils.serialization import write_json

logger = logging.getLogger(__name__)


def register(subparsers, parents: Sequence[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("glue", help="attach a handle or a strip")
    which = parser.add_subparsers(dest="surgery", required=True)
    for name, text in (("handle", "handle between two points"), ("strip", "strip between two boundary points")):
        sub = which.add_parser(name, parents=list(parents), help=f"attach a {text}")
        add_surface_args(sub)
        sub.add_argument("--p", type=int, default=None, help="first endpoint vertex")
        sub.add_argument("--q", type=int, default=None, help="second endpoint vertex")
        sub.add_argument("--eps", type=float, required=True, help="neck radius")
        sub.add_argument("--l", type=float, default=3.0, help="neck length in units of eps")
        if name == "handle":
            sub.add_argument("--n-theta", type=int, default=16, help="seam vertices per neck end")
        else:
            sub.add_argument("--orientation", choices=["preserve", "reverse"], default="preserve")
        sub.set_defaults(handler=run)


def run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    source, m = load_surface(args)
    if args.surgery == "handle":
        p, q = default_handle_points(m, args.p, args.q)
        glued, report = attach_handle(m, p, q, args.eps, args.l, args.n_theta)
    else:
        p, q = default_strip_points(m, args.p, args.q)
        glued, report = attach_strip(m, p, q, args.eps, args.l, args.orientation)

    run_dir = RunDirectory(
        f"glue-{args.surgery}",
        argv,
        run_arguments(args),
        effective_seed(args),
        inputs=[input_file(source)],
        out=args.out,
    )
    if glued.positions is not None:
        save_mesh(glued, run_dir.output("surface.off"), "off")
    run_dir.output("surface.json").write_text(to_canonical_json(glued) + "\n", encoding="utf-8")
    write_json(
        run_dir.output("surgery.json"),
        {"source": source, "p": p, "q": q, "surface": glued.summary(), "report": report.to_dict()},
    )
    run_dir.finish()
    logger.info(
        f"Glued {args.surgery} at ({p}, {q}): genus {report.genus_before} -> {report.genus_after}, "
        f"{report.boundary_components_after} boundary component(s)"
    )
    print(run_dir.root)
    return 0
