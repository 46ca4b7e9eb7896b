"""Eigenmap certificates and their defect reports."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.models.spectrum import ProblemKind


@dataclass
class EigenmapCertificate:
    """
    Map Phi = (Phi_1, ..., Phi_n) built from solved eigenvectors.

    ``coefficients`` maps the spectrum's eigenvector columns ``indices`` to the
    components, so ``components = eigenvectors[:, indices] @ coefficients``.
    ``eigenvalues`` is the diagonal Lambda in normalized units; the
    normalization defect is |Phi|^2_Lambda - 1 per vertex.
    """

    kind: ProblemKind
    indices: list[int]
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    components: np.ndarray
    weights: np.ndarray
    cluster_mass: dict[int, float]
    harmonic_residuals: np.ndarray
    normalization_defect: np.ndarray
    support: np.ndarray
    raw_normalization_sup: float
    normalization_sup: float
    normalization_l1: float
    normalization_mean: float
    branch_candidates: np.ndarray
    energy_density: np.ndarray
    total_mass: float
    feasible: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return int(self.components.shape[1])

    def norm_squared(self) -> np.ndarray:
        """|Phi|^2_Lambda at every vertex."""
        return (self.components**2) @ self.eigenvalues

    def to_dict(self, include_fields: bool = False) -> dict:
        doc = {
            "kind": self.kind.value,
            "indices": self.indices,
            "eigenvalues": self.eigenvalues,
            "n_components": self.n_components,
            "weights": self.weights,
            "cluster_mass": {str(k): v for k, v in self.cluster_mass.items()},
            "harmonic_residuals": self.harmonic_residuals,
            "raw_normalization_sup": self.raw_normalization_sup,
            "normalization_sup": self.normalization_sup,
            "normalization_l1": self.normalization_l1,
            "normalization_mean": self.normalization_mean,
            "branch_candidates": self.branch_candidates,
            "total_mass": self.total_mass,
            "feasible": self.feasible,
            "notes": self.notes,
        }
        if include_fields:
            doc["coefficients"] = self.coefficients
            doc["normalization_defect"] = self.normalization_defect
        return doc


@dataclass
class ConformalityReport:
    """Per-face sqrt(2) |trace-free part| / trace of sum_i dPhi_i (x) dPhi_i."""

    per_face: np.ndarray
    mean: float
    sup: float
    l1: float
    zero_energy_faces: np.ndarray

    def to_dict(self, include_field: bool = False) -> dict:
        doc = {
            "mean": self.mean,
            "sup": self.sup,
            "l1": self.l1,
            "zero_energy_faces": self.zero_energy_faces,
        }
        if include_field:
            doc["per_face"] = self.per_face
        return doc


@dataclass
class ProbeResult:
    """Separation of two vertices under the map and the map's gradient there."""

    p: int
    q: int
    distance: float
    normalized_distance: float
    gradient_p: float
    gradient_q: float
    branch_p: bool
    branch_q: bool

    @property
    def branch(self) -> bool:
        return self.branch_p or self.branch_q

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "distance": self.distance,
            "normalized_distance": self.normalized_distance,
            "gradient_p": self.gradient_p,
            "gradient_q": self.gradient_q,
            "branch": self.branch,
        }


@dataclass
class CapacityReport:
    """Dirichlet energy of the logarithmic cutoff around a vertex."""

    center: int
    eps: float
    energy: float
    analytic: float
    rings_in_annulus: int
    far_field_energy: float
    inner_radius: float
    outer_radius: float

    @property
    def relative_error(self) -> float:
        return abs(self.energy - self.analytic) / self.analytic

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "eps": self.eps,
            "energy": self.energy,
            "analytic": self.analytic,
            "relative_error": self.relative_error,
            "rings_in_annulus": self.rings_in_annulus,
            "far_field_energy": self.far_field_energy,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
        }


@dataclass
class ExtensionReport:
    """Cylinder-to-disk energy ratio of a Fourier mode and its analytic value."""

    k: int
    length: float
    n: int
    ratio: float
    raw_ratios: tuple[float, float]
    analytic: float
    lower_bound: float
    cylinder_energy: float
    disk_energy: float
    extrapolated: bool = True
    notes: Optional[list[str]] = None

    @property
    def error(self) -> float:
        return abs(self.ratio - self.analytic)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "length": self.length,
            "n": self.n,
            "ratio": self.ratio,
            "raw_ratios": list(self.raw_ratios),
            "analytic": self.analytic,
            "error": self.error,
            "lower_bound": self.lower_bound,
            "cylinder_energy": self.cylinder_energy,
            "disk_energy": self.disk_energy,
            "extrapolated": self.extrapolated,
            "notes": self.notes or [],
        }
