"""
Gluing surgeries on triangulated surfaces.

Disks are cut combinatorially: the faces touching a graph-distance ball are
removed, grown in a locally unfolded chart until the rim clears the seam
circle, and replaced by a graded polar collar whose innermost ring is the
seam. A handle glues a flat cylinder between two seams; a strip glues a flat
rectangle between two boundary arcs.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.models.surface import SurgeryKind, SurgeryReport, TriSurface, heron_areas
from src.services import stitching
from src.services.topology import build_surface, edge_tables, graph_distances
from src.utils.errors import MeshError, SurgeryError

logger = logging.getLogger(__name__)

COLLAR_REACH = 0.8
UNFOLD_MARGIN_EDGES = 4
MAX_GROWTH_STEPS = 1000


@dataclass
class _DiskCut:
    center: int
    faces: np.ndarray
    interior: np.ndarray
    rim: np.ndarray
    rim_angles: np.ndarray
    clearance: float


def _edge_faces(m: TriSurface) -> np.ndarray:
    """(E, 2) faces on either side of each edge, -1 on the boundary side."""
    table = np.full((m.n_edges, 2), -1, dtype=np.int64)
    flat = m.face_edges.ravel()
    order = np.argsort(flat, kind="stable")
    edges_sorted = flat[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = edges_sorted[1:] != edges_sorted[:-1]
    table[edges_sorted[first], 0] = order[first] // 3
    table[edges_sorted[~first], 1] = order[~first] // 3
    return table


def _place(chart: np.ndarray, m: TriSurface, f: int, c: int) -> None:
    """Place corner c of face f to the left of the directed edge between the other two."""
    face = m.faces[f]
    w, u, x = face[(c + 1) % 3], face[(c + 2) % 3], face[c]
    d_wx = m.corner_lengths[f, (c + 2) % 3]
    d_ux = m.corner_lengths[f, (c + 1) % 3]
    base = chart[u] - chart[w]
    span = np.linalg.norm(base)
    e = base / span
    normal = np.array([-e[1], e[0]])
    a = (d_wx**2 - d_ux**2 + span**2) / (2.0 * span)
    h = np.sqrt(max(d_wx**2 - a**2, 0.0))
    chart[x] = chart[w] + a * e + h * normal


def unfold_chart(
    m: TriSurface, center: int, allowed: np.ndarray, edge_faces: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Lay the allowed faces around ``center`` out in the plane, breadth-first.

    Returns (V, 2) coordinates with the center at the origin; vertices not
    reached are NaN. A vertex keeps the position of the first face placing it.
    """
    edge_faces = _edge_faces(m) if edge_faces is None else edge_faces
    chart = np.full((m.n_vertices, 2), np.nan)
    star = np.nonzero(allowed & (m.faces == center).any(axis=1))[0]
    if star.size == 0:
        raise SurgeryError(f"vertex {center} has no faces to unfold", {"vertex": int(center)})
    start = int(star[0])
    c = int(np.nonzero(m.faces[start] == center)[0][0])
    chart[center] = 0.0
    chart[m.faces[start, (c + 1) % 3]] = (m.corner_lengths[start, (c + 2) % 3], 0.0)
    _place(chart, m, start, (c + 2) % 3)

    visited = np.zeros(m.n_faces, dtype=bool)
    visited[start] = True
    queue = deque([start])
    while queue:
        f = queue.popleft()
        for e in m.face_edges[f]:
            for g in edge_faces[e]:
                if g < 0 or visited[g] or not allowed[g]:
                    continue
                visited[g] = True
                missing = np.nonzero(np.isnan(chart[m.faces[g], 0]))[0]
                for corner in missing:
                    _place(chart, m, int(g), int(corner))
                queue.append(int(g))
    return chart


def _segment_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from the origin to segments a-b, vectorized over rows."""
    d = b - a
    t = np.clip(-np.einsum("ij,ij->i", a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * d, axis=1)


def _region_rim(m: TriSurface, region: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rim edges of a face region and their directed half-edges (region on the left)."""
    counts = np.bincount(m.face_edges[region].ravel(), minlength=m.n_edges)
    fe = m.face_edges[region]
    on_rim = counts[fe] == 1
    rows, corners = np.nonzero(on_rim)
    faces = m.faces[region][rows]
    idx = np.arange(len(rows))
    half = np.stack([faces[idx, (corners + 1) % 3], faces[idx, (corners + 2) % 3]], axis=1)
    return fe[rows, corners], half


def _wrap_angle(x: np.ndarray) -> np.ndarray:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def _pinched_vertices(half: np.ndarray) -> np.ndarray:
    """Rim vertices that start more than one rim half-edge."""
    starts, counts = np.unique(half[:, 0], return_counts=True)
    return starts[counts > 1]


def cut_disk(
    m: TriSurface,
    center: int,
    eps: float,
    n_theta: int,
    distances: np.ndarray,
    edge_faces: np.ndarray,
) -> tuple[_DiskCut, np.ndarray]:
    """Choose the face region excised around ``center``; returns the cut and its chart."""
    near = np.minimum(distances[m.edges[:, 0]], distances[m.edges[:, 1]]) <= eps
    h_loc = float(m.lengths[near].max())
    reach = eps + UNFOLD_MARGIN_EDGES * h_loc
    allowed = distances[m.faces].max(axis=1) <= reach
    chart = unfold_chart(m, center, allowed, edge_faces)

    ring_edge = 2.0 * eps * np.sin(np.pi / n_theta)
    required = eps + 0.5 * ring_edge
    region = (distances[m.faces] < eps).any(axis=1)
    for _ in range(MAX_GROWTH_STEPS):
        rim_edges, half = _region_rim(m, np.nonzero(region)[0])
        a, b = chart[half[:, 0]], chart[half[:, 1]]
        if np.isnan(a).any() or np.isnan(b).any():
            raise SurgeryError(
                f"disk of radius {eps} around vertex {center} exceeds the injectivity scale",
                {"vertex": int(center), "eps": eps},
            )
        close = _segment_distance(a, b) < required
        pinched = _pinched_vertices(half)
        if not close.any() and pinched.size == 0:
            break
        grow: set[int] = set()
        for e in rim_edges[close]:
            grow.update(int(g) for g in edge_faces[e] if g < 0 or not region[g])
        if pinched.size:
            # fill the fans around vertices where the rim touches itself
            touching = np.isin(m.faces, pinched).any(axis=1) & ~region
            grow.update(int(g) for g in np.nonzero(touching)[0])
        for g in sorted(grow):
            if g < 0:
                raise SurgeryError(
                    f"disk around vertex {center} reaches the surface boundary",
                    {"vertex": int(center), "eps": eps},
                )
            if not allowed[g]:
                raise SurgeryError(
                    f"disk of radius {eps} around vertex {center} exceeds the injectivity scale",
                    {"vertex": int(center), "eps": eps},
                )
            region[g] = True
    else:
        raise SurgeryError(f"disk around vertex {center} did not settle", {"vertex": int(center)})

    faces = np.nonzero(region)[0]
    _, half = _region_rim(m, faces)
    region_vertices = np.unique(m.faces[faces])
    region_edges = np.unique(m.face_edges[faces])
    euler = len(region_vertices) - len(region_edges) + len(faces)
    successor = dict(zip(half[:, 0].tolist(), half[:, 1].tolist()))
    if euler != 1 or len(successor) != len(half):
        raise SurgeryError(
            f"region cut around vertex {center} is not a topological disk",
            {"vertex": int(center), "euler_characteristic": int(euler)},
        )
    start = min(successor)
    rim = [start]
    v = successor[start]
    while v != start:
        rim.append(v)
        v = successor[v]
        if len(rim) > len(successor):
            break
    if len(rim) != len(successor):
        raise SurgeryError(
            f"region cut around vertex {center} has more than one rim loop",
            {"vertex": int(center)},
        )
    rim = np.asarray(rim, dtype=np.int64)

    xy = chart[rim]
    theta = np.arctan2(xy[:, 1], xy[:, 0])
    steps = _wrap_angle(np.roll(theta, -1) - theta)
    if (steps <= 0).any() or abs(steps.sum() - 2.0 * np.pi) > 1e-6:
        raise SurgeryError(
            f"rim around vertex {center} is not star-shaped in its chart",
            {"vertex": int(center)},
        )
    rel = np.concatenate([[0.0], np.cumsum(steps[:-1])])
    clearance = float(_segment_distance(xy, np.roll(xy, -1, axis=0)).min())

    interior = np.setdiff1d(region_vertices, rim)
    cut = _DiskCut(
        center=int(center),
        faces=faces,
        interior=interior,
        rim=rim,
        rim_angles=rel,
        clearance=clearance,
    )
    return cut, chart


class _Assembly:
    """Accumulates a surgery result in temporary labels: old vertices keep their index."""

    def __init__(self, m: TriSurface):
        self.m = m
        self.n_new = 0
        self.coords: list[np.ndarray] = []
        self.groups: list[tuple[np.ndarray, np.ndarray]] = []
        self.positions: list[np.ndarray] = []

    def new_vertices(self, count: int) -> np.ndarray:
        labels = self.m.n_vertices + self.n_new + np.arange(count)
        self.n_new += count
        return labels

    def add_faces(self, faces: Sequence, corner_lengths: np.ndarray) -> None:
        self.groups.append((np.asarray(faces, dtype=np.int64).reshape(-1, 3), corner_lengths))


def _planar_corner_lengths(faces: np.ndarray, xy: dict) -> np.ndarray:
    pts = np.array([[xy[int(v)] for v in f] for f in faces])
    out = np.empty((len(faces), 3))
    for c in range(3):
        out[:, c] = np.linalg.norm(pts[:, (c + 2) % 3] - pts[:, (c + 1) % 3], axis=1)
    return out


def _signed_areas(faces: np.ndarray, xy: dict) -> np.ndarray:
    pts = np.array([[xy[int(v)] for v in f] for f in faces])
    d1 = pts[:, 1] - pts[:, 0]
    d2 = pts[:, 2] - pts[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _build_collar(
    asm: _Assembly, cut: _DiskCut, chart: np.ndarray, eps: float, n_theta: int
) -> tuple[np.ndarray, int, dict]:
    """Seam ring plus log-graded rings out to the rim; returns the seam labels, ring count, coords."""
    reach = COLLAR_REACH * cut.clearance
    ratio = 1.0 + 2.0 * np.pi / n_theta
    n_extra = int(np.ceil(np.log(reach / eps) / np.log(ratio))) if reach > eps else 0
    radii = eps * (reach / eps) ** (np.arange(n_extra + 1) / max(n_extra, 1))
    if n_extra == 0:
        radii = np.array([eps])

    alpha0 = float(np.arctan2(chart[cut.rim[0], 1], chart[cut.rim[0], 0]))
    rel = 2.0 * np.pi * np.arange(n_theta) / n_theta
    unit = np.stack([np.cos(alpha0 + rel), np.sin(alpha0 + rel)], axis=1)

    xy: dict[int, np.ndarray] = {int(v): chart[v] for v in cut.rim}
    rings = []
    for r in radii:
        labels = asm.new_vertices(n_theta)
        for label, p in zip(labels, r * unit):
            xy[int(label)] = p
        rings.append(labels)

    faces = []
    for inner, outer in zip(rings[:-1], rings[1:]):
        faces.extend(stitching.zip_rings(outer, rel, inner, rel))
    faces.extend(stitching.zip_rings(cut.rim, cut.rim_angles, rings[-1], rel))
    faces = np.asarray(faces, dtype=np.int64)

    if (_signed_areas(faces, xy) <= 0).any():
        raise SurgeryError(
            f"collar around vertex {cut.center} folds over; reduce eps or n_theta",
            {"vertex": cut.center, "eps": eps, "n_theta": n_theta},
        )
    asm.add_faces(faces, _planar_corner_lengths(faces, xy))
    return rings[0], len(rings), xy


def _fit_positions(m: TriSurface, cut: _DiskCut, chart: np.ndarray, xy: dict) -> dict:
    """Affine chart-to-ambient fit over the excised vertices, applied to new vertices."""
    known = np.concatenate([cut.rim, cut.interior])
    design = np.column_stack([chart[known], np.ones(len(known))])
    coeffs, *_ = np.linalg.lstsq(design, m.positions[known], rcond=None)
    return {
        label: np.append(p, 1.0) @ coeffs for label, p in xy.items() if label >= m.n_vertices
    }


def _finish(
    asm: _Assembly,
    removed_faces: np.ndarray,
    removed_vertices: np.ndarray,
    new_positions: Optional[dict],
    name: str,
) -> tuple[TriSurface, np.ndarray, int]:
    """Relabel, merge face groups and per-edge lengths, and validate the new surface."""
    m = asm.m
    keep_faces = np.setdiff1d(np.arange(m.n_faces), removed_faces)
    keep_vertex = np.ones(m.n_vertices, dtype=bool)
    keep_vertex[removed_vertices] = False
    n_kept = int(keep_vertex.sum())
    relabel = np.full(m.n_vertices + asm.n_new, -1, dtype=np.int64)
    relabel[: m.n_vertices][keep_vertex] = np.arange(n_kept)
    relabel[m.n_vertices :] = n_kept + np.arange(asm.n_new)

    groups = [(m.faces[keep_faces], m.corner_lengths[keep_faces])] + asm.groups
    faces = relabel[np.concatenate([g[0] for g in groups])]
    if (faces < 0).any():
        raise SurgeryError("surgery left a face on a removed vertex")
    edges, face_edges, _ = edge_tables(faces)
    lengths = np.full(len(edges), np.nan)
    offsets = np.cumsum([0] + [len(g[0]) for g in groups])
    # later groups win, old geometry is written last
    order = list(range(1, len(groups))) + [0]
    for gi in order:
        fe = face_edges[offsets[gi] : offsets[gi + 1]]
        lengths[fe.ravel()] = groups[gi][1].ravel()

    positions = None
    if m.positions is not None and new_positions is not None:
        positions = np.empty((n_kept + asm.n_new, 3))
        positions[:n_kept] = m.positions[keep_vertex]
        for label, p in new_positions.items():
            positions[relabel[label]] = p
    try:
        out = build_surface(
            n_kept + asm.n_new, faces, lengths=lengths, positions=positions, name=name
        )
    except MeshError as exc:
        raise SurgeryError(f"surgery produced an invalid surface: {exc.message}", exc.details) from exc
    return out, relabel, len(keep_faces)


def _validate_common(m: TriSurface, eps: float, n_theta: int) -> None:
    if not np.isfinite(eps) or eps <= 0:
        raise SurgeryError("eps must be a positive length", {"eps": eps})
    if n_theta < 3:
        raise SurgeryError("n_theta must be at least 3", {"n_theta": n_theta})


def _cut_all(m: TriSurface, centers: Sequence[int], eps: float, n_theta: int):
    centers = [int(c) for c in centers]
    for c in centers:
        if not 0 <= c < m.n_vertices:
            raise SurgeryError(f"vertex {c} is out of range", {"vertex": c})
    if len(set(centers)) != len(centers):
        raise SurgeryError("disk centers must be distinct", {"centers": centers})
    edge_faces = _edge_faces(m)
    distances = graph_distances(m, centers)
    cuts = []
    for c, dist in zip(centers, distances):
        cuts.append(cut_disk(m, c, eps, n_theta, dist, edge_faces))
    seen: set[int] = set()
    for cut, _ in cuts:
        verts = set(np.unique(m.faces[cut.faces]).tolist())
        if verts & seen:
            raise SurgeryError(
                f"disks of radius {eps} overlap near vertex {cut.center}",
                {"eps": eps, "centers": centers},
            )
        seen |= verts
    return cuts


def _excise(m: TriSurface, centers: Sequence[int], eps: float, n_theta: int):
    cuts = _cut_all(m, centers, eps, n_theta)
    asm = _Assembly(m)
    seams, collar_rings, new_positions = [], [], {}
    for cut, chart in cuts:
        seam, n_rings, xy = _build_collar(asm, cut, chart, eps, n_theta)
        seams.append(seam)
        collar_rings.append(n_rings)
        if m.positions is not None:
            new_positions.update(_fit_positions(m, cut, chart, xy))
    removed_faces = np.concatenate([cut.faces for cut, _ in cuts])
    removed_vertices = np.concatenate([cut.interior for cut, _ in cuts])
    return asm, cuts, seams, collar_rings, new_positions, removed_faces, removed_vertices


def _report(
    kind: SurgeryKind,
    m: TriSurface,
    out: TriSurface,
    relabel: np.ndarray,
    n_kept_faces: int,
    eps: float,
    length: float,
    n_theta: int,
    n_rows: int,
    removed_faces: np.ndarray,
    removed_vertices: np.ndarray,
    seams: list,
    rims: list,
    inserted_area: float,
) -> SurgeryReport:
    n_kept = m.n_vertices - len(removed_vertices)
    area_removed = float(m.face_areas[removed_faces].sum()) if len(removed_faces) else 0.0
    return SurgeryReport(
        kind=kind,
        eps=eps,
        length=length,
        n_theta=n_theta,
        n_rows=n_rows,
        removed_faces=np.sort(removed_faces),
        removed_vertices=np.sort(removed_vertices),
        inserted_vertices=(n_kept, out.n_vertices),
        inserted_faces=(n_kept_faces, out.n_faces),
        vertex_map=relabel[: m.n_vertices].copy(),
        seams=seams,
        rims=rims,
        area_removed=area_removed,
        area_added=float(out.face_areas[n_kept_faces:].sum()),
        inserted_area=inserted_area,
        euler_before=m.euler_characteristic,
        euler_after=out.euler_characteristic,
        genus_before=m.genus,
        genus_after=out.genus,
        boundary_components_before=m.n_boundary_components,
        boundary_components_after=out.n_boundary_components,
        boundary_length_before=m.boundary_length,
        boundary_length_after=out.boundary_length,
    )


def excise_disks(
    m: TriSurface, centers: Sequence[int], eps: float, n_theta: int = 16
) -> tuple[TriSurface, SurgeryReport]:
    """
    Remove an eps-disk around each center and leave a seam ring of n_theta vertices.

    The result has one new boundary loop per center. Outside the seams it is
    triangulated exactly as the corresponding handle attachment.
    """
    _validate_common(m, eps, n_theta)
    if not m.is_closed:
        raise SurgeryError("disk excision needs a closed surface")
    asm, cuts, seams, collar_rings, new_positions, removed_faces, removed_vertices = _excise(
        m, centers, eps, n_theta
    )
    out, relabel, n_kept_faces = _finish(
        asm, removed_faces, removed_vertices, new_positions, f"{m.name}-excised"
    )
    report = _report(
        SurgeryKind.EXCISION, m, out, relabel, n_kept_faces, eps, 0.0, n_theta, 0,
        removed_faces, removed_vertices,
        seams=[relabel[s] for s in seams],
        rims=[relabel[cut.rim] for cut, _ in cuts],
        inserted_area=0.0,
    )
    report.collar_rings = collar_rings
    logger.info(
        f"Excised {len(cuts)} disks of radius {eps}: V {m.n_vertices} -> {out.n_vertices}, "
        f"boundary loops {out.n_boundary_components}"
    )
    return out, report


def neck_circumference(eps: float, n_theta: int) -> float:
    """Perimeter of the seam polygon; tends to 2*pi*eps as n_theta grows."""
    return 2.0 * n_theta * eps * np.sin(np.pi / n_theta)


def attach_handle(
    m: TriSurface, p: int, q: int, eps: float, length: float, n_theta: int = 16
) -> tuple[TriSurface, SurgeryReport]:
    """
    Replace eps-disks around p and q by a flat cylinder of height length * eps.

    Row 0 of the cylinder is the seam around p in angular order; the last row
    is the seam around q in reversed order, which keeps the result oriented.
    """
    _validate_common(m, eps, n_theta)
    if not m.is_closed:
        raise SurgeryError("handle attachment needs a closed surface")
    if p == q:
        raise SurgeryError("handle endpoints must differ", {"p": p, "q": q})
    if not np.isfinite(length) or length <= 0:
        raise SurgeryError("handle length must be positive", {"l": length})

    asm, cuts, seams, collar_rings, new_positions, removed_faces, removed_vertices = _excise(
        m, [p, q], eps, n_theta
    )
    circumference = neck_circumference(eps, n_theta)
    dx = circumference / n_theta
    height = length * eps
    n_rows = max(2, int(np.ceil(height / dx)))
    dy = height / n_rows

    ring_p = seams[0]
    ring_q = seams[1][(-np.arange(n_theta)) % n_theta]
    grid = np.empty((n_rows + 1, n_theta), dtype=np.int64)
    grid[0] = ring_p
    grid[n_rows] = ring_q
    interior = asm.new_vertices((n_rows - 1) * n_theta)
    grid[1:n_rows] = interior.reshape(n_rows - 1, n_theta)
    cyl_faces = np.asarray(stitching.grid_quads(grid, periodic=True), dtype=np.int64)
    diag = np.hypot(dx, dy)
    corner = np.tile(np.array([[dy, diag, dx], [dx, dy, diag]]), (len(cyl_faces) // 2, 1))
    asm.add_faces(cyl_faces, corner)

    if m.positions is not None:
        bottom = np.array([new_positions[int(v)] for v in ring_p])
        top = np.array([new_positions[int(v)] for v in ring_q])
        for k in range(1, n_rows):
            tau = k / n_rows
            for j, label in enumerate(grid[k]):
                new_positions[int(label)] = (1.0 - tau) * bottom[j] + tau * top[j]

    out, relabel, n_kept_faces = _finish(
        asm, removed_faces, removed_vertices, new_positions, f"{m.name}+handle"
    )
    n_cyl = len(cyl_faces)
    inserted_area = float(out.face_areas[out.n_faces - n_cyl :].sum())
    columns = np.arange(n_theta)
    report = _report(
        SurgeryKind.HANDLE, m, out, relabel, n_kept_faces, eps, length, n_theta, n_rows,
        removed_faces, removed_vertices,
        seams=[
            np.stack([relabel[ring_p], columns], axis=1),
            np.stack([relabel[ring_q], columns], axis=1),
        ],
        rims=[relabel[cut.rim] for cut, _ in cuts],
        inserted_area=inserted_area,
    )
    report.collar_rings = collar_rings
    logger.info(
        f"Attached handle p={p} q={q} eps={eps} l={length}: genus {m.genus} -> {out.genus}, "
        f"{n_rows} rows of {n_theta}"
    )
    return out, report


# --------------------------------------------------------------------------- strips


def _loop_of(m: TriSurface, v: int) -> np.ndarray:
    for loop in m.boundary_loops:
        if v in loop:
            return loop
    raise SurgeryError(f"vertex {v} is not on the boundary", {"vertex": int(v)})


def _loop_edge_lengths(m: TriSurface, loop: np.ndarray) -> np.ndarray:
    nxt = np.roll(loop, -1)
    return np.array([m.lengths[m.edge_index(int(a), int(b))] for a, b in zip(loop, nxt)])


def _arc_position(m: TriSurface, v: int) -> tuple[np.ndarray, int, float, float]:
    """Loop through v, the arc coordinate of v, and the loop length."""
    loop = _loop_of(m, v)
    steps = _loop_edge_lengths(m, loop)
    cumulative = np.concatenate([[0.0], np.cumsum(steps)])
    i = int(np.nonzero(loop == v)[0][0])
    return loop, i, float(cumulative[i]), float(cumulative[-1])


def _split_boundary_edge(m: TriSurface, a: int, b: int, t: float) -> tuple[TriSurface, int]:
    """Insert a vertex at fraction t along boundary edge a->b; the adjacent face is split in two."""
    e = m.edge_index(a, b)
    f = int(np.nonzero((m.face_edges == e).any(axis=1))[0][0])
    face = m.faces[f]
    c = int(np.nonzero(m.face_edges[f] == e)[0][0])
    o = int(face[c])
    u, w = int(face[(c + 1) % 3]), int(face[(c + 2) % 3])
    if (u, w) != (a, b):
        # boundary loops run with the surface on the left, so a->b matches the face
        raise SurgeryError(f"boundary edge {a}->{b} is not consistently oriented")
    length = m.lengths[e]
    d_ou = m.lengths[m.edge_index(o, u)]
    d_ow = m.lengths[m.edge_index(o, w)]
    d_ox = np.sqrt((1.0 - t) * d_ou**2 + t * d_ow**2 - t * (1.0 - t) * length**2)
    x = m.n_vertices

    faces = m.faces.copy()
    faces[f] = (u, x, o)
    faces = np.vstack([faces, [(x, w, o)]])
    corner = np.vstack([m.corner_lengths, np.zeros((1, 3))])
    corner[f] = (d_ox, d_ou, t * length)
    corner[-1] = (d_ow, d_ox, (1.0 - t) * length)

    positions = None
    if m.positions is not None:
        positions = np.vstack([m.positions, (1.0 - t) * m.positions[u] + t * m.positions[w]])
    try:
        out = build_surface(
            m.n_vertices + 1, faces, corner_lengths=corner, positions=positions, name=m.name
        )
    except MeshError as exc:
        raise SurgeryError(f"boundary split produced an invalid surface: {exc.message}") from exc
    return out, x


def _point_at(m: TriSurface, v: int, distance: float, forward: bool) -> tuple[TriSurface, int]:
    """Vertex at boundary arc distance from v, splitting an edge when needed."""
    loop = _loop_of(m, v)
    if not forward:
        loop = loop[::-1]
    i0 = int(np.nonzero(loop == v)[0][0])
    walk = np.roll(loop, -i0)
    travelled = 0.0
    for a, b in zip(walk, np.roll(walk, -1)):
        step = m.lengths[m.edge_index(int(a), int(b))]
        if travelled + step >= distance:
            t = (distance - travelled) / step
            if t <= 1e-12:
                return m, int(a)
            if t >= 1.0 - 1e-12:
                return m, int(b)
            if forward:
                return _split_boundary_edge(m, int(a), int(b), t)
            return _split_boundary_edge(m, int(b), int(a), 1.0 - t)
        travelled += step
    raise SurgeryError("boundary arc is longer than its loop")


def _arc(m: TriSurface, start: int, end: int) -> tuple[np.ndarray, np.ndarray]:
    """Loop vertices from start to end inclusive, with arc coordinates from start."""
    loop = _loop_of(m, start)
    i0 = int(np.nonzero(loop == start)[0][0])
    walk = np.roll(loop, -i0)
    stop = int(np.nonzero(walk == end)[0][0])
    verts = walk[: stop + 1]
    steps = [m.lengths[m.edge_index(int(a), int(b))] for a, b in zip(verts[:-1], verts[1:])]
    return verts, np.concatenate([[0.0], np.cumsum(steps)])


def _check_arcs(m: TriSurface, p: int, q: int, eps: float) -> None:
    loop_p, _, s_p, total_p = _arc_position(m, p)
    loop_q, _, s_q, total_q = _arc_position(m, q)
    if 2.0 * eps >= total_p or 2.0 * eps >= total_q:
        raise SurgeryError("boundary arc of radius eps covers a whole boundary loop", {"eps": eps})
    if loop_p is loop_q:
        gap = abs(s_p - s_q)
        gap = min(gap, total_p - gap)
        if gap <= 2.0 * eps:
            raise SurgeryError(
                f"boundary arcs around {p} and {q} overlap", {"p": p, "q": q, "eps": eps}
            )


def attach_strip(
    m: TriSurface,
    p: int,
    q: int,
    eps: float,
    length: float,
    orientation: str = "preserve",
) -> tuple[TriSurface, SurgeryReport]:
    """
    Glue the flat rectangle [-eps, eps] x [-length*eps/2, length*eps/2] along its
    short sides to the boundary arcs of half-length eps around p and q.
    """
    if not np.isfinite(eps) or eps <= 0:
        raise SurgeryError("eps must be a positive length", {"eps": eps})
    if not np.isfinite(length) or length <= 0:
        raise SurgeryError("strip length must be positive", {"l": length})
    if m.is_closed:
        raise SurgeryError("strip attachment needs a surface with boundary")
    boundary = set(m.boundary_vertices.tolist())
    for v in (p, q):
        if v not in boundary:
            raise SurgeryError(f"vertex {v} is not on the boundary", {"vertex": int(v)})
    if p == q:
        raise SurgeryError("strip endpoints must differ", {"p": p, "q": q})
    if orientation == "reverse":
        raise SurgeryError(
            "an orientation-reversing strip yields a non-orientable surface, "
            "which oriented triangulations cannot represent",
            {"orientation": orientation},
        )
    if orientation != "preserve":
        raise SurgeryError(f"unknown strip orientation '{orientation}'")
    _check_arcs(m, p, q, eps)

    n_before = m.n_vertices
    f_before = m.n_faces
    work = m
    work, b_p = _point_at(work, p, eps, forward=True)
    work, a_p = _point_at(work, p, eps, forward=False)
    work, b_q = _point_at(work, q, eps, forward=True)
    work, a_q = _point_at(work, q, eps, forward=False)
    n_split = work.n_vertices - n_before

    arc_p, s_p = _arc(work, a_p, b_p)
    arc_q, s_q = _arc(work, a_q, b_q)
    total_p, total_q = s_p[-1], s_q[-1]
    # bottom edge of the strip runs +x while the p-arc runs a_p -> b_p, top edge the other way
    bottom = arc_p[::-1]
    bottom_x = (eps - s_p * (2.0 * eps / total_p))[::-1]
    top = arc_q
    top_x = -eps + s_q * (2.0 * eps / total_q)

    height = length * eps
    n_cols = max(len(arc_p), len(arc_q))
    spacing = 2.0 * eps / (n_cols - 1)
    n_rows = max(2, int(np.ceil(height / spacing)))
    row_y = -0.5 * height + height * np.arange(n_rows + 1) / n_rows
    uniform_x = np.linspace(-eps, eps, n_cols)

    asm = _Assembly(work)
    rows = [bottom]
    rows_x = [bottom_x]
    for _ in range(1, n_rows):
        rows.append(asm.new_vertices(n_cols))
        rows_x.append(uniform_x)
    rows.append(top)
    rows_x.append(top_x)

    xy: dict[int, np.ndarray] = {}
    for k, (ids, xs) in enumerate(zip(rows, rows_x)):
        for v, x in zip(ids, xs):
            xy[int(v)] = np.array([x, row_y[k]])
    faces = []
    for k in range(n_rows):
        faces.extend(stitching.zip_rows(rows[k], rows_x[k], rows[k + 1], rows_x[k + 1]))
    faces = np.asarray(faces, dtype=np.int64)
    asm.add_faces(faces, _planar_corner_lengths(faces, xy))

    new_positions = None
    if work.positions is not None:
        new_positions = {}
        order_p = np.argsort(bottom_x)
        order_q = np.argsort(top_x)
        for k in range(1, n_rows):
            tau = k / n_rows
            for v, x in zip(rows[k], rows_x[k]):
                lower = np.array(
                    [np.interp(x, bottom_x[order_p], work.positions[bottom[order_p], d]) for d in range(3)]
                )
                upper = np.array(
                    [np.interp(x, top_x[order_q], work.positions[top[order_q], d]) for d in range(3)]
                )
                new_positions[int(v)] = (1.0 - tau) * lower + tau * upper

    empty = np.zeros(0, dtype=np.int64)
    out, relabel, n_kept_faces = _finish(asm, empty, empty, new_positions, f"{m.name}+strip")
    inserted_area = float(out.face_areas[n_kept_faces:].sum())
    report = _report(
        SurgeryKind.STRIP, m, out, np.arange(out.n_vertices), f_before, eps, length, n_cols, n_rows,
        empty, empty,
        seams=[
            np.stack([bottom, np.arange(len(bottom))], axis=1),
            np.stack([top, np.arange(len(top))], axis=1),
        ],
        rims=[arc_p, arc_q],
        inserted_area=inserted_area,
    )
    report.area_added = inserted_area
    report.notes.append(f"{n_split} boundary edges split to make both arcs exactly 2*eps long")
    logger.info(
        f"Attached strip p={p} q={q} eps={eps} l={length}: boundary loops "
        f"{m.n_boundary_components} -> {out.n_boundary_components}"
    )
    return out, report
