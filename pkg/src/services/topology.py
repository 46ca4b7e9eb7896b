"""Edge tables, manifold validation, boundary loops and graph distances."""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from src.models.surface import TriSurface
from src.utils.errors import MeshError

logger = logging.getLogger(__name__)

# Relative slack for the strict triangle inequality and shared-edge agreement.
TRIANGLE_SLACK = 1e-12
EDGE_AGREEMENT = 1e-9


def opposite_half_edges(faces: np.ndarray) -> np.ndarray:
    """(F,3,2) directed half-edges; entry c runs between the two corners other than c."""
    return np.stack([faces[:, [1, 2]], faces[:, [2, 0]], faces[:, [0, 1]]], axis=1)


def edge_tables(faces: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique sorted edges, the face-to-edge map and per-edge face counts."""
    n_faces = faces.shape[0]
    undirected = np.sort(opposite_half_edges(faces).reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(
        undirected, axis=0, return_inverse=True, return_counts=True
    )
    return edges.astype(np.int64), inverse.reshape(n_faces, 3).astype(np.int64), counts


def _check_faces(n_vertices: int, faces: np.ndarray) -> None:
    if faces.ndim != 2 or faces.shape[1] != 3 or faces.shape[0] == 0:
        raise MeshError("mesh must contain at least one triangle")
    if faces.min() < 0 or faces.max() >= n_vertices:
        raise MeshError("face references a vertex index out of range")
    repeated = (
        (faces[:, 0] == faces[:, 1])
        | (faces[:, 1] == faces[:, 2])
        | (faces[:, 0] == faces[:, 2])
    )
    if repeated.any():
        f = int(np.nonzero(repeated)[0][0])
        raise MeshError(f"degenerate face {f} repeats a vertex", {"face": f})
    used = np.zeros(n_vertices, dtype=bool)
    used[faces.ravel()] = True
    if not used.all():
        v = int(np.nonzero(~used)[0][0])
        raise MeshError(f"vertex {v} is not referenced by any face", {"vertex": v})


def _check_manifold(faces: np.ndarray, edges: np.ndarray, counts: np.ndarray) -> None:
    if (counts > 2).any():
        e = int(np.nonzero(counts > 2)[0][0])
        raise MeshError(
            f"non-manifold edge ({edges[e, 0]}, {edges[e, 1]}) shared by {counts[e]} faces",
            {"edge": edges[e].tolist()},
        )
    directed = opposite_half_edges(faces).reshape(-1, 2)
    uniq, dcounts = np.unique(directed, axis=0, return_counts=True)
    if (dcounts > 1).any():
        bad = uniq[np.nonzero(dcounts > 1)[0][0]]
        raise MeshError(
            f"inconsistent orientation along edge ({bad[0]}, {bad[1]}): "
            "surface is non-orientable or has a flipped face",
            {"edge": bad.tolist()},
        )


def _check_vertex_fans(faces: np.ndarray, face_edges: np.ndarray, counts: np.ndarray) -> None:
    """Every vertex star must be a single fan (rules out pinched vertices)."""
    n_faces = faces.shape[0]
    flat_edges = face_edges.ravel()
    order = np.argsort(flat_edges, kind="stable")
    sorted_edges = flat_edges[order]
    interior = counts[sorted_edges] == 2
    first = order[interior][0::2]
    second = order[interior][1::2]
    f1, c1 = first // 3, first % 3
    f2, c2 = second // 3, second % 3
    # Opposite orientations: corner c1+1 of f1 meets corner c2+2 of f2 and vice versa.
    a = np.concatenate([3 * f1 + (c1 + 1) % 3, 3 * f1 + (c1 + 2) % 3])
    b = np.concatenate([3 * f2 + (c2 + 2) % 3, 3 * f2 + (c2 + 1) % 3])
    n_corners = 3 * n_faces
    graph = sparse.coo_matrix(
        (np.ones(a.size), (a, b)), shape=(n_corners, n_corners)
    ).tocsr()
    n_fans, labels = csgraph.connected_components(graph, directed=False)
    corner_vertex = faces.ravel()
    fans_per_vertex = np.zeros(corner_vertex.max() + 1, dtype=np.int64)
    first_corner = np.unique(labels, return_index=True)[1]
    np.add.at(fans_per_vertex, corner_vertex[first_corner], 1)
    if (fans_per_vertex > 1).any():
        v = int(np.nonzero(fans_per_vertex > 1)[0][0])
        raise MeshError(f"non-manifold vertex {v} joins several fans", {"vertex": v})


def boundary_loops(faces: np.ndarray, face_edges: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, ...]:
    """Boundary cycles oriented with the surface on the left, canonically ordered."""
    directed = opposite_half_edges(faces).reshape(-1, 2)
    on_boundary = counts[face_edges.ravel()] == 1
    half = directed[on_boundary]
    if half.size == 0:
        return ()
    successor: dict[int, int] = {}
    for start, end in half.tolist():
        if start in successor:
            raise MeshError(
                f"boundary vertex {start} has two outgoing boundary edges",
                {"vertex": start},
            )
        successor[start] = end
    loops = []
    remaining = set(successor)
    while remaining:
        start = min(remaining)
        loop = [start]
        remaining.discard(start)
        v = successor[start]
        while v != start:
            if v not in remaining:
                raise MeshError(f"boundary loop through vertex {v} does not close", {"vertex": v})
            loop.append(v)
            remaining.discard(v)
            v = successor[v]
        loops.append(np.asarray(loop, dtype=np.int64))
    loops.sort(key=lambda lp: int(lp[0]))
    return tuple(loops)


def check_lengths(faces: np.ndarray, face_edges: np.ndarray, lengths: np.ndarray) -> None:
    """Positive finite lengths and strict triangle inequality on every face."""
    if not np.all(np.isfinite(lengths)):
        raise MeshError("edge lengths must be finite")
    if (lengths <= 0).any():
        e = int(np.nonzero(lengths <= 0)[0][0])
        raise MeshError(f"degenerate zero-length edge {e}", {"edge": e})
    corner = lengths[face_edges]
    total = corner.sum(axis=1)
    slack = total - 2.0 * corner.max(axis=1)
    bad = slack <= TRIANGLE_SLACK * total
    if bad.any():
        f = int(np.nonzero(bad)[0][0])
        raise MeshError(
            f"face {f} {faces[f].tolist()} violates the strict triangle inequality",
            {"face": f, "lengths": corner[f].tolist()},
        )


def check_connected(n_vertices: int, edges: np.ndarray) -> None:
    graph = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n_vertices, n_vertices)
    )
    n_components, _ = csgraph.connected_components(graph, directed=False)
    if n_components != 1:
        raise MeshError(f"surface has {n_components} connected components, expected 1")


def build_surface(
    n_vertices: int,
    faces: np.ndarray,
    *,
    lengths: Optional[np.ndarray] = None,
    corner_lengths: Optional[np.ndarray] = None,
    positions: Optional[np.ndarray] = None,
    dirichlet_lengths: Optional[np.ndarray] = None,
    name: str = "",
) -> TriSurface:
    """
    Validate combinatorics and metric data and assemble a TriSurface.

    Exactly one metric source is used, in order of preference: per-edge
    ``lengths``, per-face ``corner_lengths``, or ``positions``.
    """
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    _check_faces(n_vertices, faces)
    edges, face_edges, counts = edge_tables(faces)
    _check_manifold(faces, edges, counts)
    _check_vertex_fans(faces, face_edges, counts)
    loops = boundary_loops(faces, face_edges, counts)

    if positions is not None:
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        if positions.shape != (n_vertices, 3):
            raise MeshError(f"positions must have shape ({n_vertices}, 3)")

    if lengths is not None:
        lengths = np.ascontiguousarray(lengths, dtype=np.float64)
        if lengths.shape != (len(edges),):
            raise MeshError("edge length array does not match the edge count")
    elif corner_lengths is not None:
        lengths = reconcile_corner_lengths(face_edges, corner_lengths, len(edges))
    elif positions is not None:
        lengths = np.linalg.norm(positions[edges[:, 0]] - positions[edges[:, 1]], axis=1)
    else:
        raise MeshError("a surface needs edge lengths, corner lengths or positions")

    check_lengths(faces, face_edges, lengths)
    if dirichlet_lengths is not None:
        check_lengths(faces, face_edges, dirichlet_lengths)
    check_connected(n_vertices, edges)

    return TriSurface(
        n_vertices=int(n_vertices),
        faces=faces,
        edges=edges,
        face_edges=face_edges,
        lengths=lengths,
        boundary_loops=loops,
        positions=positions,
        dirichlet_lengths=dirichlet_lengths,
        name=name,
    )


def reconcile_corner_lengths(face_edges: np.ndarray, corner_lengths: np.ndarray, n_edges: int) -> np.ndarray:
    """Collapse (F,3) corner lengths to per-edge lengths, checking shared edges agree."""
    corner_lengths = np.asarray(corner_lengths, dtype=np.float64)
    flat_e = face_edges.ravel()
    flat_l = corner_lengths.ravel()
    lengths = np.full(n_edges, np.nan)
    # first occurrence wins
    lengths[flat_e[::-1]] = flat_l[::-1]
    mismatch = np.abs(flat_l - lengths[flat_e]) > EDGE_AGREEMENT * np.abs(lengths[flat_e])
    if mismatch.any():
        e = int(flat_e[np.nonzero(mismatch)[0][0]])
        raise MeshError(f"faces disagree on the length of edge {e}", {"edge": e})
    return lengths


def surface_from_positions(faces: np.ndarray, positions: np.ndarray, name: str = "") -> TriSurface:
    positions = np.asarray(positions, dtype=np.float64)
    return build_surface(len(positions), faces, positions=positions, name=name)


def edge_graph(m: TriSurface, weights: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """Symmetric vertex adjacency weighted by edge length."""
    w = m.lengths if weights is None else weights
    i, j = m.edges[:, 0], m.edges[:, 1]
    return sparse.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(m.n_vertices, m.n_vertices),
    ).tocsr()


def graph_distances(m: TriSurface, sources: Sequence[int]) -> np.ndarray:
    """Shortest edge-path distances from each source, shape (len(sources), V)."""
    return csgraph.dijkstra(edge_graph(m), directed=False, indices=list(sources))


def farthest_vertex(m: TriSurface, source: int) -> int:
    d = graph_distances(m, [source])[0]
    return int(np.argmax(d))


def vertex_faces(m: TriSurface, vertex: int) -> np.ndarray:
    return np.nonzero((m.faces == vertex).any(axis=1))[0]
