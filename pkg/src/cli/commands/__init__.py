"""Subcommands and the argument helpers they share."""

import argparse
from pathlib import Path
from typing import Optional

import numpy as np

from src.models.measure import DensityMeasure
from src.models.spectrum import ProblemKind, SpectrumResult
from src.models.surface import TriSurface
from src.services.builtin_surfaces import surface_from_source
from src.services.metric import boundary_density
from src.services.optimizer import density_from_source
from src.services.topology import graph_distances
from src.utils.config import get_settings
from src.utils.errors import ValidationError

NAMED_DENSITIES = ("uniform", "area", "boundary")


def add_surface_args(parser: argparse.ArgumentParser, default_builtin: Optional[str] = None) -> None:
    group = parser.add_mutually_exclusive_group(required=default_builtin is None)
    group.add_argument("--mesh", type=Path, help="mesh file (.off, .obj or canonical .json)")
    group.add_argument(
        "--builtin",
        default=default_builtin,
        help="builtin surface such as sphere:3, torus:32, torus:32:hex, disk:16, genus:2:3",
    )


def surface_source(args: argparse.Namespace) -> str:
    return str(args.mesh) if args.mesh is not None else args.builtin


def load_surface(args: argparse.Namespace) -> tuple[str, TriSurface]:
    source = surface_source(args)
    if args.mesh is not None and not args.mesh.exists():
        raise ValidationError(f"mesh file {args.mesh} not found")
    return source, surface_from_source(source)


def input_file(source: Optional[str]) -> Optional[Path]:
    """The path behind a mesh or density source, if it names a file."""
    if source is None or source in NAMED_DENSITIES:
        return None
    path = Path(source)
    return path if path.is_file() else None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text}") from exc


def parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text}") from exc


def effective_seed(args: argparse.Namespace, fallback: Optional[int] = None) -> int:
    if args.seed is not None:
        return int(args.seed)
    return get_settings().solver_seed if fallback is None else int(fallback)


def density_for(m: TriSurface, source: str, kind: ProblemKind) -> DensityMeasure:
    """Named or file density for the given problem kind."""
    if kind is ProblemKind.STEKLOV:
        if m.is_closed:
            raise ValidationError("closed surface has no Steklov problem")
        if source in ("uniform", "boundary"):
            return boundary_density(m).normalized()
        if source == "area":
            raise ValidationError("Steklov problems need a boundary density, not 'area'")
    elif source == "boundary":
        raise ValidationError("a boundary density only makes sense for Steklov problems")
    return density_from_source(m, source)


def default_handle_points(m: TriSurface, p: Optional[int], q: Optional[int]) -> tuple[int, int]:
    """p defaults to vertex 0 and q to the vertex farthest from p."""
    p = 0 if p is None else p
    if q is None:
        q = int(np.argmax(graph_distances(m, [p])[0]))
    return p, q


def default_strip_points(m: TriSurface, p: Optional[int], q: Optional[int]) -> tuple[int, int]:
    """Boundary endpoints: the first boundary vertex and the boundary vertex farthest from it."""
    boundary = m.boundary_vertices
    if boundary.size == 0:
        raise ValidationError("strip attachment needs a surface with boundary")
    p = int(boundary[0]) if p is None else p
    if q is None:
        d = graph_distances(m, [p])[0]
        q = int(boundary[np.argmax(d[boundary])])
    return p, q


def spectrum_document(mesh: str, density: str, s: SpectrumResult) -> dict:
    """The JSON layout ``certify`` reads back."""
    return {
        "mesh": mesh,
        "density": density,
        "kind": s.kind.value,
        "k": s.k,
        "spectrum": s.to_dict(),
    }
