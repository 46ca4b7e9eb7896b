"""Vertex measures, conformal factors and per-face metric perturbations."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np


class MeasureSupport(str, Enum):
    """Where a density measure lives."""

    SURFACE = "surface"
    BOUNDARY = "boundary"


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """Nonnegative vertex-lumped measure; beta(phi, psi) = sum_v w_v phi_v psi_v."""

    weights: np.ndarray
    support: MeasureSupport = MeasureSupport.SURFACE

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("density weights must be a vector")
        if not np.all(np.isfinite(w)) or (w < 0).any():
            raise ValueError("density weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def n_vertices(self) -> int:
        return int(self.weights.shape[0])

    def pair(self, phi: np.ndarray, psi: np.ndarray) -> float:
        return float(np.dot(self.weights * phi, psi))

    def normalized(self) -> "DensityMeasure":
        mass = self.total_mass
        if mass <= 0:
            raise ValueError("cannot normalize a measure with zero mass")
        return DensityMeasure(self.weights / mass, self.support)

    def scaled(self, factor: float) -> "DensityMeasure":
        return DensityMeasure(self.weights * factor, self.support)

    def to_dict(self) -> dict:
        return {"support": self.support.value, "weights": self.weights}

    @classmethod
    def from_dict(cls, data: dict) -> "DensityMeasure":
        return cls(
            np.asarray(data["weights"], dtype=np.float64),
            MeasureSupport(data.get("support", MeasureSupport.SURFACE.value)),
        )


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Per-vertex log factor u; lengths scale by exp((u_a + u_b) / 2)."""

    u: np.ndarray
    reference: str = ""

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float64)
        if u.ndim != 1 or not np.all(np.isfinite(u)):
            raise ValueError("conformal factor must be a finite vector")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    def __add__(self, other: "ConformalFactor") -> "ConformalFactor":
        return ConformalFactor(self.u + other.u, self.reference)

    def to_dict(self) -> dict:
        return {"reference": self.reference, "u": self.u}

    @classmethod
    def from_dict(cls, data: dict) -> "ConformalFactor":
        return cls(np.asarray(data["u"], dtype=np.float64), data.get("reference", ""))


def rotation_matrices(angles: np.ndarray) -> np.ndarray:
    c, s = np.cos(angles), np.sin(angles)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)


@dataclass(frozen=True, eq=False)
class MetricPerturbation:
    """
    Piecewise-constant symmetric 2-tensor, stored per face as (h11, h12, h22)
    in the orthonormal frame of the face's canonical chart.
    """

    components: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.components, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 3:
            raise ValueError("metric perturbation must have shape (F, 3)")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def n_faces(self) -> int:
        return int(self.components.shape[0])

    def matrices(self) -> np.ndarray:
        h11, h12, h22 = self.components.T
        return np.stack(
            [np.stack([h11, h12], axis=-1), np.stack([h12, h22], axis=-1)], axis=-2
        )

    @classmethod
    def from_matrices(cls, mats: np.ndarray) -> "MetricPerturbation":
        sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
        return cls(np.stack([sym[:, 0, 0], sym[:, 0, 1], sym[:, 1, 1]], axis=1))

    def trace(self) -> np.ndarray:
        return self.components[:, 0] + self.components[:, 2]

    def scaled(self, factor: float) -> "MetricPerturbation":
        return MetricPerturbation(self.components * factor)

    def rotated(self, angles: np.ndarray) -> "MetricPerturbation":
        """Express the same tensor in frames rotated by ``angles`` (one per face)."""
        rot = rotation_matrices(np.asarray(angles, dtype=np.float64))
        mats = np.einsum("fji,fjk,fkl->fil", rot, self.matrices(), rot)
        return MetricPerturbation.from_matrices(mats)

    @classmethod
    def zeros(cls, n_faces: int) -> "MetricPerturbation":
        return cls(np.zeros((n_faces, 3)))

    @classmethod
    def identity(cls, n_faces: int) -> "MetricPerturbation":
        comps = np.zeros((n_faces, 3))
        comps[:, 0] = 1.0
        comps[:, 2] = 1.0
        return cls(comps)

    @classmethod
    def random(
        cls, n_faces: int, rng: Optional[np.random.Generator] = None, scale: float = 1.0
    ) -> "MetricPerturbation":
        rng = rng or np.random.default_rng(0)
        return cls(scale * rng.standard_normal((n_faces, 3)))

    def to_dict(self) -> dict:
        return {"components": self.components}
