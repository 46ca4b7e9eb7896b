"""
Builtin test surfaces.

Each constructor returns a validated TriSurface. Flat tori, cylinders and the
planar disks carry exact intrinsic lengths; the sphere carries its embedding.
"""

import logging
import re
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from src.models.surface import TriSurface
from src.services import stitching
from src.services.mesh_io import load_mesh
from src.services.surgery import attach_handle
from src.services.topology import build_surface, edge_tables, surface_from_positions
from src.utils.errors import MeshError

logger = logging.getLogger(__name__)

SQUARE_BASIS = ((1.0, 0.0), (0.0, 1.0))
HEX_BASIS = ((1.0, 0.0), (0.5, np.sqrt(3.0) / 2.0))

GENUS_HANDLE_EPS = 0.2
GENUS_HANDLE_LENGTH = 1.0
GENUS_HANDLE_N_THETA = 12
MAX_BUILTIN_GENUS = 6

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = np.array(
    [
        [-1, _GOLDEN, 0], [1, _GOLDEN, 0], [-1, -_GOLDEN, 0], [1, -_GOLDEN, 0],
        [0, -1, _GOLDEN], [0, 1, _GOLDEN], [0, -1, -_GOLDEN], [0, 1, -_GOLDEN],
        [_GOLDEN, 0, -1], [_GOLDEN, 0, 1], [-_GOLDEN, 0, -1], [-_GOLDEN, 0, 1],
    ],
    dtype=np.float64,
)
_ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def _subdivide(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One midpoint subdivision; new vertices are appended in edge order."""
    edges, face_edges, _ = edge_tables(faces)
    n = len(vertices)
    mids = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    m_bc, m_ca, m_ab = (n + face_edges[:, c] for c in range(3))
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, m_ab, m_ca], axis=1),
            np.stack([b, m_bc, m_ab], axis=1),
            np.stack([c, m_ca, m_bc], axis=1),
            np.stack([m_ab, m_bc, m_ca], axis=1),
        ]
    )
    return np.vstack([vertices, mids]), new_faces


def sphere(resolution: int) -> TriSurface:
    """Unit icosphere with ``resolution`` subdivisions: V = 10 * 4**resolution + 2."""
    if resolution < 0:
        raise MeshError("sphere resolution must be nonnegative")
    vertices = _ICOSAHEDRON_VERTICES / np.linalg.norm(_ICOSAHEDRON_VERTICES[0])
    faces = _ICOSAHEDRON_FACES
    for _ in range(resolution):
        vertices, faces = _subdivide(vertices, faces)
        vertices = vertices / np.linalg.norm(vertices, axis=1, keepdims=True)
    return surface_from_positions(faces, vertices, name=f"sphere:{resolution}")


def _basis_array(basis: Sequence[Sequence[float]]) -> np.ndarray:
    b = np.asarray(basis, dtype=np.float64)
    if b.shape != (2, 2):
        raise MeshError("lattice basis must be two planar vectors")
    det = b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]
    if not np.isfinite(det) or abs(det) < 1e-12 * max(1.0, np.abs(b).max() ** 2):
        raise MeshError("lattice basis is degenerate")
    return b


def torus_chart(n: int, basis: Sequence[Sequence[float]] = SQUARE_BASIS) -> np.ndarray:
    """Planar coordinates of the n x n torus grid vertices inside the fundamental domain."""
    b = _basis_array(basis)
    i, j = np.divmod(np.arange(n * n), n)
    return np.outer(i / n, b[0]) + np.outer(j / n, b[1])


def flat_torus(n: int, basis: Sequence[Sequence[float]] = SQUARE_BASIS) -> TriSurface:
    """
    Flat torus R^2 / (Z a + Z b) on an n x n grid.

    Every cell is split along its shorter diagonal, so the hexagonal lattice is
    made of equilateral triangles. Lengths are exact lattice vector norms.
    """
    if n < 3:
        raise MeshError("flat torus needs resolution n >= 3", {"resolution": n})
    b = _basis_array(basis)
    a_vec, b_vec = b[0] / n, b[1] / n
    positive = (a_vec[0] * b_vec[1] - a_vec[1] * b_vec[0]) > 0
    short_anti = np.linalg.norm(b_vec - a_vec) < np.linalg.norm(a_vec + b_vec) * (1 - 1e-12)
    if short_anti:
        local = ((0, 0), (1, 0), (0, 1)), ((1, 0), (1, 1), (0, 1))
    else:
        local = ((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))
    if not positive:
        local = tuple(tuple(reversed(tri)) for tri in local)

    faces = []
    for i in range(n):
        for j in range(n):
            for tri in local:
                faces.append([((i + di) % n) * n + (j + dj) % n for di, dj in tri])

    corner = np.empty((len(local), 3))
    for t, tri in enumerate(local):
        for c in range(3):
            (i1, j1), (i2, j2) = tri[(c + 1) % 3], tri[(c + 2) % 3]
            corner[t, c] = np.linalg.norm((i2 - i1) * a_vec + (j2 - j1) * b_vec)
    corner_lengths = np.tile(corner, (n * n, 1))

    return build_surface(
        n * n,
        np.asarray(faces, dtype=np.int64),
        corner_lengths=corner_lengths,
        name=f"flat_torus:{n}",
    )


def disk(resolution: int) -> TriSurface:
    """Unit disk: a center plus rings j = 1..resolution with 6j vertices each."""
    if resolution < 1:
        raise MeshError("disk resolution must be >= 1")
    points = [np.zeros(2)]
    rings = []
    for j in range(1, resolution + 1):
        count = 6 * j
        # i / count first, so angles shared by two rings compare equal in the zipper
        angles = 2.0 * np.pi * (np.arange(count) / count)
        start = len(points)
        points.extend(np.stack([np.cos(angles), np.sin(angles)], axis=1) * (j / resolution))
        rings.append((np.arange(start, start + count), angles))
    faces = stitching.fan(0, rings[0][0])
    for (inner, inner_angle), (outer, outer_angle) in zip(rings[:-1], rings[1:]):
        faces.extend(stitching.zip_rings(outer, outer_angle, inner, inner_angle))
    return _planar_surface(np.asarray(points), faces, f"disk:{resolution}")


def polar_disk(
    r_min: float, n_theta: int = 32, r_max: float = 1.0
) -> TriSurface:
    """
    Flat disk of radius ``r_max`` with geometrically graded rings from ``r_min``.

    Ring spacing follows the angular spacing, so triangles stay near-isotropic
    from the smallest ring outward. A fan closes the center.
    """
    if not 0 < r_min < r_max:
        raise MeshError("polar disk needs 0 < r_min < r_max")
    if n_theta < 3:
        raise MeshError("polar disk needs n_theta >= 3")
    ratio = 1.0 + 2.0 * np.pi / n_theta
    n_rings = max(1, int(np.ceil(np.log(r_max / r_min) / np.log(ratio))))
    radii = r_min * (r_max / r_min) ** (np.arange(n_rings + 1) / n_rings)
    angles = 2.0 * np.pi * np.arange(n_theta) / n_theta
    unit = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    points = np.vstack([np.zeros((1, 2))] + [r * unit for r in radii])
    ring_ids = [1 + k * n_theta + np.arange(n_theta) for k in range(n_rings + 1)]
    faces = stitching.fan(0, ring_ids[0])
    for inner, outer in zip(ring_ids[:-1], ring_ids[1:]):
        faces.extend(stitching.zip_rings(outer, angles, inner, angles))
    return _planar_surface(points, faces, f"polar_disk:{r_min:g}")


def polar_radii(m: TriSurface) -> np.ndarray:
    """Distance of each vertex of a planar builtin disk from its center."""
    if m.positions is None:
        raise MeshError("surface has no planar embedding")
    return np.hypot(m.positions[:, 0], m.positions[:, 1])


def cylinder(
    height: float,
    n_theta: int = 64,
    n_rows: Optional[int] = None,
    circumference: float = 2.0 * np.pi,
) -> TriSurface:
    """
    Flat cylinder of the given circumference and height, two boundary loops.

    Row 0 is the bottom ring (y = 0), row ``n_rows`` the top ring.
    """
    if height <= 0 or circumference <= 0:
        raise MeshError("cylinder needs positive height and circumference")
    if n_theta < 3:
        raise MeshError("cylinder needs n_theta >= 3")
    dx = circumference / n_theta
    if n_rows is None:
        n_rows = max(2, int(np.ceil(height / dx)))
    dy = height / n_rows
    grid = np.arange((n_rows + 1) * n_theta).reshape(n_rows + 1, n_theta)
    faces = np.asarray(stitching.grid_quads(grid, periodic=True), dtype=np.int64)
    # quads split as (a, b, c) and (a, c, d) along the diagonal a-c
    diag = np.hypot(dx, dy)
    corner = np.array([[dy, diag, dx], [dx, dy, diag]])
    corner_lengths = np.tile(corner, (len(faces) // 2, 1))

    radius = circumference / (2.0 * np.pi)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rows = np.arange(n_rows + 1) * dy
    positions = np.column_stack(
        [
            np.tile(radius * np.cos(theta), n_rows + 1),
            np.tile(radius * np.sin(theta), n_rows + 1),
            np.repeat(rows, n_theta),
        ]
    )
    return build_surface(
        (n_rows + 1) * n_theta,
        faces,
        corner_lengths=corner_lengths,
        positions=positions,
        name=f"cylinder:{height:g}",
    )


def _planar_surface(points: np.ndarray, faces: list, name: str) -> TriSurface:
    positions = np.column_stack([points, np.zeros(len(points))])
    return surface_from_positions(np.asarray(faces, dtype=np.int64), positions, name=name)


def antipodal_pairs(m: TriSurface, candidates: Sequence[int]) -> list[tuple[int, int]]:
    """Pair each candidate vertex with the candidate closest to its antipode, in index order."""
    if m.positions is None:
        raise MeshError("antipodal pairing needs vertex positions")
    remaining = list(candidates)
    pairs = []
    while remaining:
        v = remaining.pop(0)
        if not remaining:
            break
        gaps = [np.linalg.norm(m.positions[w] + m.positions[v]) for w in remaining]
        w = remaining.pop(int(np.argmin(gaps)))
        pairs.append((v, w))
    return pairs


def genus_g(
    genus: int,
    resolution: int,
    eps: float = GENUS_HANDLE_EPS,
    length: float = GENUS_HANDLE_LENGTH,
    n_theta: int = GENUS_HANDLE_N_THETA,
) -> TriSurface:
    """Closed genus-g surface: an icosphere with handles at antipodal icosahedral vertices."""
    if not 0 <= genus <= MAX_BUILTIN_GENUS or resolution < 2:
        raise MeshError(
            f"unsupported genus/resolution combination (genus={genus}, resolution={resolution})",
            {"genus": genus, "resolution": resolution, "max_genus": MAX_BUILTIN_GENUS},
        )
    m = sphere(resolution)
    pairs = antipodal_pairs(m, range(len(_ICOSAHEDRON_VERTICES)))[:genus]
    # surgery compacts vertex indices; track the original icosahedral labels
    current = np.arange(m.n_vertices)
    for p, q in pairs:
        m, report = attach_handle(m, int(current[p]), int(current[q]), eps, length, n_theta)
        keep = current >= 0
        current[keep] = report.vertex_map[current[keep]]
        logger.debug(f"genus_g: handle {p}-{q} attached, genus now {m.genus}")
    return m.replace(name=f"genus:{genus}:{resolution}")


_BUILTIN_PATTERN = re.compile(r"^(?P<kind>[a-z_]+)(?::(?P<args>.*))?$")


def builtin_surface(spec: str) -> TriSurface:
    """
    Build a surface from a short spec string.

    ``sphere:3``, ``torus:32``, ``torus:32:hex``, ``disk:16``, ``genus:2:3``,
    ``polar:1e-4`` (optionally ``polar:1e-4:64``), ``cylinder:2.5`` (optionally
    ``cylinder:2.5:64``).
    """
    match = _BUILTIN_PATTERN.match(spec.strip().lower())
    if not match:
        raise MeshError(f"cannot parse builtin surface '{spec}'")
    kind = match.group("kind")
    args = [a for a in (match.group("args") or "").split(":") if a]
    try:
        if kind == "sphere":
            return sphere(int(args[0]) if args else 3)
        if kind in ("torus", "flat_torus"):
            n = int(args[0]) if args else 32
            lattice = args[1] if len(args) > 1 else "square"
            if lattice not in ("square", "hex"):
                raise MeshError(f"unknown torus lattice '{lattice}'")
            return flat_torus(n, HEX_BASIS if lattice == "hex" else SQUARE_BASIS)
        if kind == "disk":
            return disk(int(args[0]) if args else 16)
        if kind in ("genus", "genus_g"):
            return genus_g(int(args[0]), int(args[1]) if len(args) > 1 else 3)
        if kind == "polar":
            return polar_disk(float(args[0]), int(args[1]) if len(args) > 1 else 32)
        if kind == "cylinder":
            return cylinder(float(args[0]), int(args[1]) if len(args) > 1 else 64)
    except (IndexError, ValueError) as exc:
        raise MeshError(f"bad builtin surface spec '{spec}': {exc}") from exc
    raise MeshError(f"unknown builtin surface kind '{kind}'")


def surface_from_source(source: str) -> TriSurface:
    """A mesh file path when one exists, otherwise a builtin spec string."""
    path = Path(source)
    if path.suffix.lower() in (".off", ".obj", ".json") or path.exists():
        return load_mesh(path)
    return builtin_surface(source)
