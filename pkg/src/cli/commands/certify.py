"""``certify``: build the eigenmap certificate of a solved spectrum."""

import argparse
import csv
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from src.cli.commands import NAMED_DENSITIES, density_for, effective_seed, parse_ints
from src.cli.manifest import RunDirectory, run_arguments
from src.models.functional import FunctionalSpec
from src.models.spectrum import AssembledProblem, ProblemKind, SpectrumResult
from src.models.surface import TriSurface
from src.services.builtin_surfaces import surface_from_source
from src.services.certificates import (
    build_eigenmap,
    conformality_defect,
    pair_identification_probe,
)
from src.services.eigensolver import solve
from src.services.fem import assemble
from src.services.variation import cluster_weights
from src.utils.errors import ValidationError
from src.utils.serialization import read_json, read_sidecar, write_json

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("mesh", "density", "kind", "k", "spectrum")


def register(subparsers, parents: Sequence[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "certify", parents=list(parents), help="eigenmap certificate of a solved spectrum"
    )
    parser.add_argument("--spectrum", type=Path, required=True, help="spectrum.json or result.json")
    parser.add_argument("--F", dest="functional", default="inv1", help="functional, e.g. inv1, log2")
    parser.add_argument("--starts", type=int, default=None, help="random starts for the cluster rotations")
    parser.add_argument("--probe", type=parse_ints, default=None, help="vertex pair p,q to compare under the map")
    parser.add_argument("--faces-csv", action="store_true", help="also write per-face conformality")
    parser.set_defaults(handler=run)


def _resolve(source: str, base: Path) -> str:
    if source in NAMED_DENSITIES or Path(source).is_absolute():
        return source
    candidate = base / source
    return str(candidate) if candidate.is_file() else source


def load_spectrum(path: Path, seed: int) -> tuple[TriSurface, AssembledProblem, SpectrumResult, list[Path]]:
    """Reload the surface and density a spectrum file records; reuse its eigenvectors when saved."""
    if not path.is_file():
        raise ValidationError(f"spectrum file {path} not found")
    try:
        doc = read_json(path)
    except ValueError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    missing = [key for key in REQUIRED_KEYS if key not in doc]
    if missing:
        raise ValidationError(f"{path} is not a spectrum file: missing {', '.join(missing)}")

    inputs = [path]
    mesh = _resolve(doc["mesh"], path.parent)
    density = _resolve(doc["density"], path.parent)
    kind = ProblemKind(doc["kind"])
    m = surface_from_source(mesh)
    p = assemble(m, density_for(m, density, kind), kind)
    for source in (mesh, density):
        if Path(source).is_file():
            inputs.append(Path(source))

    vectors = doc.get("vectors")
    if vectors is not None and (path.parent / vectors["file"]).is_file():
        sidecar = path.parent / vectors["file"]
        inputs.append(sidecar)
        try:
            eigenvectors = read_sidecar(sidecar, tuple(vectors["shape"]))
            s = SpectrumResult.from_dict(doc["spectrum"], eigenvectors)
        except ValueError as exc:
            raise ValidationError(f"eigenvector sidecar {sidecar} is unusable: {exc}") from exc
        if eigenvectors.shape[0] != p.dimension:
            raise ValidationError(
                f"sidecar has {eigenvectors.shape[0]} rows, surface has {p.dimension} vertices"
            )
        logger.info(f"Reusing eigenvectors from {sidecar}")
    else:
        logger.info(f"No eigenvector sidecar next to {path}; re-solving k={doc['k']}")
        s = solve(p, int(doc["k"]), seed=seed)
    return m, p, s, inputs


def _write_faces(path: Path, per_face: np.ndarray, areas: np.ndarray) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["face", "area", "conformality"])
        for f, (a, d) in enumerate(zip(areas, per_face)):
            writer.writerow([f, repr(float(a)), repr(float(d))])


def run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = FunctionalSpec.parse(args.functional)
    seed = effective_seed(args)
    m, p, s, inputs = load_spectrum(args.spectrum, seed)
    if spec.m > s.k:
        raise ValidationError(f"{spec.name} uses {spec.m} eigenvalues but the spectrum has {s.k}")

    cert = build_eigenmap(p, s, cluster_weights(spec, s), seed=seed, starts=args.starts)
    conformality = conformality_defect(cert, m)
    probe: Optional[dict] = None
    if args.probe is not None:
        if len(args.probe) != 2:
            raise ValidationError("--probe takes exactly two vertices")
        probe = pair_identification_probe(cert, args.probe[0], args.probe[1]).to_dict()

    run_dir = RunDirectory(
        "certify", argv, run_arguments(args), seed, inputs=inputs, out=args.out
    )
    summary = {
        "n_components": cert.n_components,
        "feasible": cert.feasible,
        "normalization_sup": cert.normalization_sup,
        "normalization_mean": cert.normalization_mean,
        "normalization_l1": cert.normalization_l1,
        "harmonic_residual_max": float(np.max(cert.harmonic_residuals)),
        "conformality_mean": conformality.mean,
        "conformality_sup": conformality.sup,
        "branch_candidates": int(len(cert.branch_candidates)),
    }
    write_json(
        run_dir.output("certificate.json"),
        {
            "spectrum": str(args.spectrum),
            "functional": spec.to_dict(),
            "summary": summary,
            "certificate": cert.to_dict(),
            "conformality": conformality.to_dict(),
            "probe": probe,
        },
    )
    if args.faces_csv:
        _write_faces(run_dir.output("conformality.csv"), conformality.per_face, m.face_areas)
    run_dir.finish()
    logger.info(
        f"Certificate: normalization sup {cert.normalization_sup:.3e}, "
        f"conformality mean {conformality.mean:.3e}"
    )
    print(run_dir.root)
    return 0
