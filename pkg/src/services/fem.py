"""P1 finite-element assembly of the Laplace and Steklov eigenproblems."""

import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from src.models.measure import DensityMeasure, MeasureSupport
from src.models.spectrum import AssembledProblem, MassKind, ProblemKind
from src.models.surface import TriSurface, heron_areas
from src.services.metric import chart_gradients, cotangents, face_charts
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

NEGATIVE_WEIGHT_SLACK = 1e-12


def dirichlet_geometry(m: TriSurface) -> tuple[np.ndarray, np.ndarray]:
    """Per-face areas and hat-function gradients in the Dirichlet chart of each face."""
    corner = m.stiffness_lengths[m.face_edges]
    return heron_areas(corner), chart_gradients(face_charts(corner))


def local_stiffness(
    areas: np.ndarray, grads: np.ndarray, face_metrics: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    (F, 3, 3) element matrices A * sqrt(det G) * D G^-1 D^T.

    Without ``face_metrics`` this is the cotangent stiffness.
    """
    if face_metrics is None:
        return areas[:, None, None] * np.einsum("fia,fja->fij", grads, grads)
    det = np.linalg.det(face_metrics)
    if (det <= 0).any():
        f = int(np.nonzero(det <= 0)[0][0])
        raise ValidationError(f"face metric on face {f} is not positive definite", {"face": f})
    inv = np.linalg.inv(face_metrics)
    scale = areas * np.sqrt(det)
    return scale[:, None, None] * np.einsum("fia,fab,fjb->fij", grads, inv, grads)


def stiffness_matrix(
    m: TriSurface, face_metrics: Optional[np.ndarray] = None
) -> sparse.csr_matrix:
    """Global stiffness; rows sum to zero."""
    areas, grads = dirichlet_geometry(m)
    local = local_stiffness(areas, grads, face_metrics)
    rows = np.repeat(m.faces, 3, axis=1).ravel()
    cols = np.tile(m.faces, (1, 3)).ravel()
    k = sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(m.n_vertices, m.n_vertices)
    ).tocsr()
    k.sum_duplicates()
    return 0.5 * (k + k.T)


def cotangent_weights(m: TriSurface) -> np.ndarray:
    """Per-edge weights (cot alpha + cot beta) / 2 from the Dirichlet lengths."""
    cots = cotangents(m.stiffness_lengths[m.face_edges])
    weights = np.zeros(m.n_edges)
    np.add.at(weights, m.face_edges.ravel(), 0.5 * cots.ravel())
    return weights


def consistent_mass_matrix(m: TriSurface) -> sparse.csr_matrix:
    """Full P1 mass matrix, A/12 (1 + delta_ij) per face."""
    areas = m.face_areas
    local = np.full((3, 3), 1.0 / 12.0) + np.eye(3) / 12.0
    vals = (areas[:, None, None] * local[None]).ravel()
    rows = np.repeat(m.faces, 3, axis=1).ravel()
    cols = np.tile(m.faces, (1, 3)).ravel()
    return sparse.coo_matrix((vals, (rows, cols)), shape=(m.n_vertices, m.n_vertices)).tocsr()


def _validate_density(m: TriSurface, beta: DensityMeasure, kind: ProblemKind) -> None:
    if beta.n_vertices != m.n_vertices:
        raise ValidationError(
            f"density has {beta.n_vertices} entries, surface has {m.n_vertices} vertices"
        )
    if beta.total_mass <= 0:
        raise ValidationError("beta(1,1) must be nonzero")
    w = beta.weights
    if kind is ProblemKind.LAPLACE:
        if (w <= 0).any():
            v = int(np.nonzero(w <= 0)[0][0])
            raise ValidationError(
                f"Laplace density vanishes at vertex {v}; lumped mass rows must be positive",
                {"vertex": v},
            )
        return
    on_boundary = np.zeros(m.n_vertices, dtype=bool)
    on_boundary[m.boundary_vertices] = True
    if (w[~on_boundary] != 0).any():
        v = int(np.nonzero((w != 0) & ~on_boundary)[0][0])
        raise ValidationError(
            f"Steklov density charges interior vertex {v}", {"vertex": v}
        )
    if (w[on_boundary] <= 0).any():
        v = int(m.boundary_vertices[np.nonzero(w[m.boundary_vertices] <= 0)[0][0]])
        raise ValidationError(
            f"Steklov density vanishes at boundary vertex {v}", {"vertex": v}
        )


def assemble(
    m: TriSurface,
    beta: DensityMeasure,
    kind: Union[ProblemKind, str] = ProblemKind.LAPLACE,
    face_metrics: Optional[np.ndarray] = None,
    mass: Union[MassKind, str] = MassKind.LUMPED,
) -> AssembledProblem:
    """Build K and M_beta; Steklov mass lives on the boundary only."""
    kind = ProblemKind(kind)
    mass = MassKind(mass)
    if kind is ProblemKind.STEKLOV and m.is_closed:
        raise ValidationError("closed surface has no Steklov problem")
    if kind is ProblemKind.STEKLOV and beta.support is not MeasureSupport.BOUNDARY:
        raise ValidationError("Steklov problems need a boundary density")
    _validate_density(m, beta, kind)

    stiffness = stiffness_matrix(m, face_metrics)
    if face_metrics is None:
        weights = cotangent_weights(m)
        scale = max(np.abs(weights).max(), 1.0)
        negative = int((weights < -NEGATIVE_WEIGHT_SLACK * scale).sum())
        if negative:
            logger.warning(f"{negative} edges of {m.name or 'surface'} have negative cotangent weights")

    consistent = None
    weights_vec = np.asarray(beta.weights, dtype=np.float64)
    if mass is MassKind.CONSISTENT:
        if kind is not ProblemKind.LAPLACE:
            raise ValidationError("consistent mass is only available for Laplace problems")
        consistent = consistent_mass_matrix(m)
        weights_vec = np.asarray(consistent.sum(axis=1)).ravel()
        logger.info("Consistent mass replaces beta with the area measure")

    return AssembledProblem(
        surface=m,
        density=beta,
        kind=kind,
        stiffness=stiffness,
        mass=weights_vec,
        mass_kind=mass,
        consistent_mass=consistent,
    )


def dirichlet_energy(p: AssembledProblem, phi: np.ndarray) -> float:
    return float(phi @ (p.stiffness @ phi))


def harmonic_extension(
    stiffness: sparse.csr_matrix, boundary: Sequence[int], values: np.ndarray
) -> np.ndarray:
    """Extend boundary values to the discrete harmonic function with those values."""
    n = stiffness.shape[0]
    boundary = np.asarray(boundary, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    mask[boundary] = True
    interior = np.nonzero(~mask)[0]
    out = np.zeros((n,) + np.shape(values)[1:])
    out[boundary] = values
    if interior.size:
        k_ii = stiffness[interior][:, interior].tocsc()
        k_ib = stiffness[interior][:, boundary]
        out[interior] = -splu(k_ii).solve(np.asarray(k_ib @ values))
    return out
