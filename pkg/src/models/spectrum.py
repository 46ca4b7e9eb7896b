"""Assembled eigenproblems, solved spectra and multiplicity clusters."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import sparse

from src.models.measure import DensityMeasure
from src.models.surface import TriSurface
from src.utils.serialization import from_json_float


class ProblemKind(str, Enum):
    """Which generalized eigenproblem is assembled."""

    LAPLACE = "laplace"
    STEKLOV = "steklov"


class MassKind(str, Enum):
    LUMPED = "lumped"
    CONSISTENT = "consistent"


@dataclass(frozen=True, eq=False)
class AssembledProblem:
    """K phi = lambda M phi on a surface, with M built from a vertex measure."""

    surface: TriSurface
    density: DensityMeasure
    kind: ProblemKind
    stiffness: sparse.csr_matrix
    mass: np.ndarray
    mass_kind: MassKind = MassKind.LUMPED
    consistent_mass: Optional[sparse.csr_matrix] = None

    @property
    def dimension(self) -> int:
        return int(self.stiffness.shape[0])

    @property
    def total_mass(self) -> float:
        """beta(1, 1)."""
        return float(self.mass.sum())

    @property
    def mass_matrix(self) -> sparse.csr_matrix:
        if self.consistent_mass is not None:
            return self.consistent_mass
        return sparse.diags(self.mass, format="csr")

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.mass > 0)[0]

    def pair(self, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
        """beta(phi, psi) for vectors or column blocks."""
        return phi.T @ (self.mass_matrix @ psi)


@dataclass(frozen=True)
class Cluster:
    """Consecutive eigenvalue indices start..end (inclusive) equal within tolerance."""

    start: int
    end: int
    value: float

    @property
    def size(self) -> int:
        return self.end - self.start + 1

    @property
    def indices(self) -> range:
        return range(self.start, self.end + 1)

    def __contains__(self, k: int) -> bool:
        return self.start <= k <= self.end

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "size": self.size, "value": self.value}


def cluster_values(values: np.ndarray, tol: float) -> list[Cluster]:
    """Split sorted values where consecutive gaps exceed tol * (1 + value)."""
    clusters = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol * (1.0 + abs(values[i - 1])):
            clusters.append(Cluster(start, i - 1, float(np.mean(values[start:i]))))
            start = i
    return clusters


@dataclass(eq=False)
class SpectrumResult:
    """
    Ascending generalized eigenpairs with lambda_0 pinned to 0.

    Eigenvectors are columns, beta-orthonormal. ``next_eigenvalue`` is the first
    value past the returned modes (inf when none was computed) and tells
    whether the last cluster is complete.
    """

    kind: ProblemKind
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    orthonormality_defect: float
    clusters: list[Cluster]
    total_mass: float
    tolerance: float
    cluster_tol: float
    next_eigenvalue: float = float("inf")
    method: str = "dense"
    notes: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.eigenvalues) - 1

    def normalized(self) -> np.ndarray:
        """lambda_i * beta(1, 1); for Steklov, beta(1, 1) is the boundary length."""
        return self.eigenvalues * self.total_mass

    def cluster_of(self, k: int) -> Cluster:
        for c in self.clusters:
            if k in c:
                return c
        raise IndexError(f"index {k} outside the computed spectrum")

    def is_truncated(self, cluster: Cluster) -> bool:
        """Whether the cluster may continue past the last returned mode."""
        if cluster.end != self.k:
            return False
        last = self.eigenvalues[-1]
        return self.next_eigenvalue - last <= self.cluster_tol * (1.0 + abs(last))

    @classmethod
    def from_dict(cls, doc: dict, eigenvectors: np.ndarray) -> "SpectrumResult":
        """Rebuild a result from ``to_dict`` output and its eigenvector matrix."""
        values = np.array([from_json_float(v) for v in doc["eigenvalues"]])
        if eigenvectors.ndim != 2 or eigenvectors.shape[1] != len(values):
            raise ValueError(
                f"eigenvectors of shape {eigenvectors.shape} do not match {len(values)} eigenvalues"
            )
        cluster_tol = from_json_float(doc["cluster_tol"])
        return cls(
            kind=ProblemKind(doc["kind"]),
            eigenvalues=values,
            eigenvectors=eigenvectors,
            residuals=np.array([from_json_float(v) for v in doc["residuals"]]),
            orthonormality_defect=from_json_float(doc["orthonormality_defect"]),
            clusters=cluster_values(values, cluster_tol),
            total_mass=from_json_float(doc["total_mass"]),
            tolerance=from_json_float(doc["tolerance"]),
            cluster_tol=cluster_tol,
            next_eigenvalue=from_json_float(doc.get("next_eigenvalue", "Infinity")),
            method=doc.get("method", "dense"),
            notes=list(doc.get("notes", [])),
        )

    def to_dict(self, include_vectors: bool = False) -> dict:
        doc = {
            "kind": self.kind.value,
            "k": self.k,
            "eigenvalues": self.eigenvalues,
            "normalized": self.normalized(),
            "residuals": self.residuals,
            "orthonormality_defect": self.orthonormality_defect,
            "clusters": [c.to_dict() for c in self.clusters],
            "total_mass": self.total_mass,
            "tolerance": self.tolerance,
            "cluster_tol": self.cluster_tol,
            "next_eigenvalue": self.next_eigenvalue,
            "method": self.method,
            "notes": self.notes,
        }
        if include_vectors:
            doc["eigenvectors"] = self.eigenvectors
        return doc

    def summary(self) -> str:
        sizes = ",".join(str(c.size) for c in self.clusters[1:])
        return (
            f"{self.kind.value} k={self.k} lambda_1={self.eigenvalues[1]:.6g} "
            f"normalized_1={self.normalized()[1]:.6g} clusters=[{sizes}] "
            f"max residual={self.residuals.max():.2e}"
        )


@dataclass
class MinMaxReport:
    """Outcome of the dense-oracle and random-subspace min-max checks."""

    k: int
    trials: int
    dense_relative_error: Optional[float]
    achieving_gap: float
    min_margin: float
    violations: int
    defects: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.defects

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "trials": self.trials,
            "dense_relative_error": self.dense_relative_error,
            "achieving_gap": self.achieving_gap,
            "min_margin": self.min_margin,
            "violations": self.violations,
            "defects": self.defects,
            "passed": self.passed,
        }
