"""Triangulated surfaces with intrinsic edge lengths, and surgery bookkeeping."""

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np


def heron_areas(corner_lengths: np.ndarray) -> np.ndarray:
    """Triangle areas from (F,3) side lengths using Kahan's stable Heron formula."""
    s = -np.sort(-np.asarray(corner_lengths, dtype=np.float64), axis=1)
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.clip(prod, 0.0, None))


@dataclass(frozen=True, eq=False)
class TriSurface:
    """
    Oriented triangulated surface carrying its metric as per-edge lengths.

    Corner ``c`` of face ``f`` is ``faces[f, c]``; ``face_edges[f, c]`` is the
    edge opposite that corner. Edges are stored with sorted endpoints.
    Positions, when present, are an ambient embedding used for I/O only.
    ``dirichlet_lengths`` pins the cotangent form to a conformal representative
    (set by conformal rescaling, cleared by surgery).
    """

    n_vertices: int
    faces: np.ndarray
    edges: np.ndarray
    face_edges: np.ndarray
    lengths: np.ndarray
    boundary_loops: tuple[np.ndarray, ...] = ()
    positions: Optional[np.ndarray] = None
    dirichlet_lengths: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        for attr in ("faces", "edges", "face_edges", "lengths", "positions", "dirichlet_lengths"):
            arr = getattr(self, attr)
            if arr is not None:
                arr.setflags(write=False)
        for loop in self.boundary_loops:
            loop.setflags(write=False)

    # ------------------------------------------------------------------ counts

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def n_boundary_components(self) -> int:
        return len(self.boundary_loops)

    @property
    def is_closed(self) -> bool:
        return not self.boundary_loops

    @property
    def genus(self) -> int:
        """Genus of the orientable surface, counting boundary circles as removed disks."""
        return (2 - self.euler_characteristic - self.n_boundary_components) // 2

    # ---------------------------------------------------------------- geometry

    @cached_property
    def corner_lengths(self) -> np.ndarray:
        """(F,3) lengths of the edges opposite each corner."""
        return self.lengths[self.face_edges]

    @cached_property
    def face_areas(self) -> np.ndarray:
        return heron_areas(self.corner_lengths)

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def edge_face_count(self) -> np.ndarray:
        return np.bincount(self.face_edges.ravel(), minlength=self.n_edges)

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_face_count == 1

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        if not self.boundary_loops:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(self.boundary_loops))

    @property
    def boundary_length(self) -> float:
        return float(self.lengths[self.boundary_edge_mask].sum())

    @property
    def stiffness_lengths(self) -> np.ndarray:
        """Lengths whose cotangent weights define the Dirichlet form."""
        return self.lengths if self.dirichlet_lengths is None else self.dirichlet_lengths

    def edge_index(self, a: int, b: int) -> int:
        """Index of edge {a, b}; raises KeyError when absent."""
        lo, hi = (a, b) if a < b else (b, a)
        idx = np.searchsorted(self.edges[:, 0], lo, side="left")
        stop = np.searchsorted(self.edges[:, 0], lo, side="right")
        hit = np.nonzero(self.edges[idx:stop, 1] == hi)[0]
        if hit.size == 0:
            raise KeyError(f"no edge between {a} and {b}")
        return int(idx + hit[0])

    def same_combinatorics(self, other: "TriSurface") -> bool:
        return (
            self.n_vertices == other.n_vertices
            and self.faces.shape == other.faces.shape
            and bool(np.array_equal(self.faces, other.faces))
        )

    def replace(self, **changes) -> "TriSurface":
        return dataclasses.replace(self, **changes)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "faces": self.n_faces,
            "euler_characteristic": self.euler_characteristic,
            "boundary_components": self.n_boundary_components,
            "genus": self.genus,
            "area": self.total_area,
            "boundary_length": self.boundary_length,
        }


class SurgeryKind(str, Enum):
    """Kinds of gluing surgery."""

    HANDLE = "handle"
    STRIP = "strip"
    EXCISION = "excision"


@dataclass
class SurgeryReport:
    """Bookkeeping for a surgery: what was cut, what was inserted, and how seams match."""

    kind: SurgeryKind
    eps: float
    length: float
    n_theta: int
    n_rows: int
    removed_faces: np.ndarray
    removed_vertices: np.ndarray
    inserted_vertices: tuple[int, int]
    inserted_faces: tuple[int, int]
    vertex_map: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    seams: list[np.ndarray] = field(default_factory=list)
    rims: list[np.ndarray] = field(default_factory=list)
    collar_rings: list[int] = field(default_factory=list)
    area_removed: float = 0.0
    area_added: float = 0.0
    inserted_area: float = 0.0
    euler_before: int = 0
    euler_after: int = 0
    genus_before: int = 0
    genus_after: int = 0
    boundary_components_before: int = 0
    boundary_components_after: int = 0
    boundary_length_before: float = 0.0
    boundary_length_after: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def n_inserted_vertices(self) -> int:
        return self.inserted_vertices[1] - self.inserted_vertices[0]

    @property
    def n_inserted_faces(self) -> int:
        return self.inserted_faces[1] - self.inserted_faces[0]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "eps": self.eps,
            "length": self.length,
            "n_theta": self.n_theta,
            "n_rows": self.n_rows,
            "removed_faces": self.removed_faces,
            "removed_vertices": self.removed_vertices,
            "inserted_vertices": list(self.inserted_vertices),
            "inserted_faces": list(self.inserted_faces),
            "vertex_map": self.vertex_map,
            "seams": self.seams,
            "rims": self.rims,
            "collar_rings": self.collar_rings,
            "area_removed": self.area_removed,
            "area_added": self.area_added,
            "inserted_area": self.inserted_area,
            "euler_before": self.euler_before,
            "euler_after": self.euler_after,
            "genus_before": self.genus_before,
            "genus_after": self.genus_after,
            "boundary_components_before": self.boundary_components_before,
            "boundary_components_after": self.boundary_components_after,
            "boundary_length_before": self.boundary_length_before,
            "boundary_length_after": self.boundary_length_after,
            "notes": self.notes,
        }
