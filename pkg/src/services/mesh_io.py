"""OFF, OBJ and canonical JSON readers and writers for TriSurface."""

import json
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.models.surface import TriSurface
from src.services.topology import build_surface
from src.utils.errors import MeshError
from src.utils.serialization import canonical_json

logger = logging.getLogger(__name__)

JSON_FORMAT_TAG = "trisurface"
JSON_FORMAT_VERSION = 1

_FORMATS = {".off": "off", ".obj": "obj", ".json": "json"}


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in _FORMATS.values():
            raise MeshError(f"unknown mesh format '{fmt}'")
        return fmt
    try:
        return _FORMATS[path.suffix.lower()]
    except KeyError:
        raise MeshError(f"cannot infer mesh format from '{path.name}'") from None


def _fan(polygon: list[int]) -> list[tuple[int, int, int]]:
    return [(polygon[0], polygon[i], polygon[i + 1]) for i in range(1, len(polygon) - 1)]


def _content_lines(text: str) -> list[str]:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def parse_off(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and fan-triangulated faces from an ASCII OFF document."""
    lines = _content_lines(text)
    if not lines:
        raise MeshError("empty OFF file")
    header = lines[0].split()
    if header[0].upper() != "OFF":
        raise MeshError("OFF file must start with 'OFF'")
    counts_tokens = header[1:] if len(header) > 1 else lines[1].split()
    body = lines[1:] if len(header) > 1 else lines[2:]
    try:
        n_vertices, n_faces = int(counts_tokens[0]), int(counts_tokens[1])
    except (IndexError, ValueError):
        raise MeshError("OFF header is missing vertex and face counts") from None
    if len(body) < n_vertices + n_faces:
        raise MeshError(
            f"OFF file declares {n_vertices} vertices and {n_faces} faces but is truncated"
        )
    try:
        vertices = np.array(
            [[float(x) for x in body[i].split()[:3]] for i in range(n_vertices)]
        )
        faces: list[tuple[int, int, int]] = []
        for line in body[n_vertices : n_vertices + n_faces]:
            tokens = [int(x) for x in line.split()]
            size = tokens[0]
            if size < 3 or len(tokens) < size + 1:
                raise MeshError(f"malformed OFF face record '{line}'")
            faces.extend(_fan(tokens[1 : size + 1]))
    except ValueError as exc:
        raise MeshError(f"OFF parse failure: {exc}") from exc
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("OFF vertices need three coordinates")
    return vertices, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def parse_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and fan-triangulated faces from the 'v' and 'f' records of an OBJ document."""
    vertices: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    try:
        for line in _content_lines(text):
            tokens = line.split()
            if tokens[0] == "v":
                vertices.append([float(x) for x in tokens[1:4]])
            elif tokens[0] == "f":
                polygon = []
                for item in tokens[1:]:
                    idx = int(item.split("/")[0])
                    polygon.append(idx - 1 if idx > 0 else len(vertices) + idx)
                if len(polygon) < 3:
                    raise MeshError(f"malformed OBJ face record '{line}'")
                faces.extend(_fan(polygon))
    except ValueError as exc:
        raise MeshError(f"OBJ parse failure: {exc}") from exc
    if not vertices or any(len(v) != 3 for v in vertices):
        raise MeshError("OBJ file needs vertices with three coordinates")
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def to_canonical_json(m: TriSurface) -> str:
    """Fixed-order JSON with shortest round-trip floats; lengths reload bit-for-bit."""
    doc = {
        "format": JSON_FORMAT_TAG,
        "version": JSON_FORMAT_VERSION,
        "name": m.name,
        "n_vertices": m.n_vertices,
        "faces": m.faces,
        "edges": m.edges,
        "lengths": m.lengths,
        "boundary_loops": list(m.boundary_loops),
        "positions": m.positions,
        "dirichlet_lengths": m.dirichlet_lengths,
    }
    return canonical_json(doc)


def from_canonical_json(text: str) -> TriSurface:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshError(f"mesh JSON parse failure: {exc}") from exc
    if doc.get("format") != JSON_FORMAT_TAG:
        raise MeshError("JSON document is not a serialized surface")
    try:
        m = build_surface(
            int(doc["n_vertices"]),
            np.asarray(doc["faces"], dtype=np.int64),
            lengths=np.asarray(doc["lengths"], dtype=np.float64),
            positions=None if doc.get("positions") is None else np.asarray(doc["positions"]),
            dirichlet_lengths=(
                None
                if doc.get("dirichlet_lengths") is None
                else np.asarray(doc["dirichlet_lengths"], dtype=np.float64)
            ),
            name=doc.get("name", ""),
        )
    except KeyError as exc:
        raise MeshError(f"mesh JSON is missing field {exc}") from None
    stored_edges = doc.get("edges")
    if stored_edges is not None and not np.array_equal(np.asarray(stored_edges), m.edges):
        raise MeshError("mesh JSON edge table does not match its faces")
    return m


def load_mesh(path: Union[str, Path], fmt: Optional[str] = None) -> TriSurface:
    """Read a surface; OFF and OBJ lengths come from the embedding."""
    path = Path(path)
    kind = _infer_format(path, fmt)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc
    if kind == "json":
        m = from_canonical_json(text)
    else:
        vertices, faces = parse_off(text) if kind == "off" else parse_obj(text)
        m = build_surface(len(vertices), faces, positions=vertices, name=path.stem)
    logger.info(
        f"Loaded {path.name}: V={m.n_vertices} F={m.n_faces} chi={m.euler_characteristic} "
        f"boundary loops={m.n_boundary_components}"
    )
    return m


def _require_positions(m: TriSurface, kind: str) -> np.ndarray:
    if m.positions is None:
        raise MeshError(f"{kind.upper()} output needs vertex positions; use JSON for intrinsic surfaces")
    return m.positions


def format_off(m: TriSurface) -> str:
    positions = _require_positions(m, "off")
    lines = ["OFF", f"{m.n_vertices} {m.n_faces} {m.n_edges}"]
    lines.extend(" ".join(repr(float(x)) for x in p) for p in positions)
    lines.extend("3 " + " ".join(str(int(v)) for v in f) for f in m.faces)
    return "\n".join(lines) + "\n"


def format_obj(m: TriSurface) -> str:
    positions = _require_positions(m, "obj")
    lines = ["v " + " ".join(repr(float(x)) for x in p) for p in positions]
    lines.extend("f " + " ".join(str(int(v) + 1) for v in f) for f in m.faces)
    return "\n".join(lines) + "\n"


def save_mesh(m: TriSurface, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    path = Path(path)
    kind = _infer_format(path, fmt)
    if kind == "json":
        text = to_canonical_json(m) + "\n"
    elif kind == "off":
        text = format_off(m)
    else:
        text = format_obj(m)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
