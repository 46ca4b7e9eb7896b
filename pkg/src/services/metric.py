"""Face charts, conformal rescaling, vertex measures and the metric distance."""

import logging
from typing import Optional, Union

import numpy as np
from scipy import sparse

from src.models.measure import (
    ConformalFactor,
    DensityMeasure,
    MeasureSupport,
    MetricPerturbation,
)
from src.models.surface import TriSurface, heron_areas
from src.services.topology import check_lengths
from src.utils.errors import MeshError, ValidationError

logger = logging.getLogger(__name__)


def face_charts(corner_lengths: np.ndarray) -> np.ndarray:
    """
    Lay each face out in the plane: corner 0 at the origin, corner 1 on the
    positive x-axis, corner 2 in the upper half-plane. Returns (F, 3, 2).
    """
    corner_lengths = np.asarray(corner_lengths, dtype=np.float64)
    l12, l02, l01 = corner_lengths[:, 0], corner_lengths[:, 1], corner_lengths[:, 2]
    area = heron_areas(corner_lengths)
    x2 = (l02**2 + l01**2 - l12**2) / (2.0 * l01)
    y2 = 2.0 * area / l01
    charts = np.zeros((corner_lengths.shape[0], 3, 2))
    charts[:, 1, 0] = l01
    charts[:, 2, 0] = x2
    charts[:, 2, 1] = y2
    return charts


def chart_gradients(charts: np.ndarray) -> np.ndarray:
    """Gradients of the three hat functions in each chart, shape (F, 3, 2)."""
    p0, p1, p2 = charts[:, 0], charts[:, 1], charts[:, 2]
    twice_area = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (
        p1[:, 1] - p0[:, 1]
    ) * (p2[:, 0] - p0[:, 0])
    grads = np.empty_like(charts)
    for i, (pj, pk) in enumerate(((p1, p2), (p2, p0), (p0, p1))):
        d = pk - pj
        grads[:, i, 0] = -d[:, 1] / twice_area
        grads[:, i, 1] = d[:, 0] / twice_area
    return grads


def cotangents(corner_lengths: np.ndarray) -> np.ndarray:
    """Cotangent of the angle at each corner, from the law of cosines."""
    sq = np.asarray(corner_lengths, dtype=np.float64) ** 2
    area = heron_areas(corner_lengths)
    cots = np.empty_like(sq)
    for c in range(3):
        a = sq[:, c]
        b = sq[:, (c + 1) % 3]
        d = sq[:, (c + 2) % 3]
        cots[:, c] = (b + d - a) / (4.0 * area)
    return cots


def face_metric_in_chart(g1: TriSurface, g2: TriSurface) -> np.ndarray:
    """The constant SPD tensor of g2 expressed in g1's face charts, shape (F, 2, 2)."""
    _require_same_faces(g1, g2)
    charts = face_charts(g1.corner_lengths)
    target = g2.corner_lengths**2
    system = np.zeros((g1.n_faces, 3, 3))
    for c in range(3):
        e = charts[:, (c + 2) % 3] - charts[:, (c + 1) % 3]
        system[:, c, 0] = e[:, 0] ** 2
        system[:, c, 1] = 2.0 * e[:, 0] * e[:, 1]
        system[:, c, 2] = e[:, 1] ** 2
    coeffs = np.linalg.solve(system, target[:, :, None])[:, :, 0]
    return MetricPerturbation(coeffs).matrices()


def metric_distance(g1: TriSurface, g2: TriSurface) -> float:
    """
    Max over faces of sqrt(ln(mu_max)^2 + ln(1/mu_min)^2), where mu are the
    eigenvalues of g2 relative to g1 on that face.
    """
    mats = face_metric_in_chart(g1, g2)
    mu = np.linalg.eigvalsh(mats)
    if (mu[:, 0] <= 0).any():
        f = int(np.nonzero(mu[:, 0] <= 0)[0][0])
        raise ValidationError(f"face {f} is degenerate in the second metric", {"face": f})
    per_face = np.sqrt(np.log(mu[:, 1]) ** 2 + np.log(1.0 / mu[:, 0]) ** 2)
    return float(per_face.max())


def _require_same_faces(g1: TriSurface, g2: TriSurface) -> None:
    if not g1.same_combinatorics(g2):
        raise ValidationError("surfaces do not share combinatorics")


def _conformal_vector(m: TriSurface, u: Union[ConformalFactor, np.ndarray]) -> np.ndarray:
    vec = u.u if isinstance(u, ConformalFactor) else np.asarray(u, dtype=np.float64)
    if vec.shape != (m.n_vertices,):
        raise ValidationError(
            f"conformal factor has {vec.shape[0]} entries, surface has {m.n_vertices} vertices"
        )
    return vec


def apply_conformal(m: TriSurface, u: Union[ConformalFactor, np.ndarray]) -> TriSurface:
    """
    Rescale lengths by exp((u_a + u_b) / 2).

    Discrete conformal rescaling does not preserve cotangent weights: the
    rescaled lengths alone would give a different stiffness. The result keeps
    ``m``'s stiffness lengths as its ``dirichlet_lengths``, so its Dirichlet
    form stays that of ``m`` while areas and lengths follow ``u``.
    """
    vec = _conformal_vector(m, u)
    scale = np.exp(0.5 * (vec[m.edges[:, 0]] + vec[m.edges[:, 1]]))
    lengths = m.lengths * scale
    try:
        check_lengths(m.faces, m.face_edges, lengths)
    except MeshError as exc:
        raise ValidationError(f"conformal rescaling produced a degenerate triangle: {exc.message}", exc.details) from exc
    return m.replace(
        lengths=lengths,
        positions=None,
        dirichlet_lengths=np.array(m.stiffness_lengths, copy=True),
        name=f"{m.name}+conformal" if m.name else "conformal",
    )


# --------------------------------------------------------------------------- measures


def voronoi_areas(m: TriSurface, corner_lengths: Optional[np.ndarray] = None) -> np.ndarray:
    """Mixed Voronoi vertex areas; obtuse faces split A/2 to the obtuse corner and A/4 elsewhere."""
    corner = m.corner_lengths if corner_lengths is None else corner_lengths
    area = heron_areas(corner)
    cots = cotangents(corner)
    sq = corner**2
    share = np.empty_like(sq)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        share[:, i] = (sq[:, k] * cots[:, k] + sq[:, j] * cots[:, j]) / 8.0
    obtuse = (cots < 0).any(axis=1)
    if obtuse.any():
        obtuse_corner = cots[obtuse] < 0
        share[obtuse] = np.where(obtuse_corner, 0.5, 0.25) * area[obtuse, None]
    out = np.zeros(m.n_vertices)
    np.add.at(out, m.faces.ravel(), share.ravel())
    return out


def boundary_lengths(m: TriSurface) -> np.ndarray:
    """Half of each adjacent boundary edge length, per vertex."""
    out = np.zeros(m.n_vertices)
    mask = m.boundary_edge_mask
    half = 0.5 * m.lengths[mask]
    np.add.at(out, m.edges[mask, 0], half)
    np.add.at(out, m.edges[mask, 1], half)
    return out


def area_density(m: TriSurface) -> DensityMeasure:
    return DensityMeasure(voronoi_areas(m), MeasureSupport.SURFACE)


def boundary_density(m: TriSurface) -> DensityMeasure:
    if m.is_closed:
        raise ValidationError("closed surface has no boundary measure")
    return DensityMeasure(boundary_lengths(m), MeasureSupport.BOUNDARY)


def uniform_probability(m: TriSurface) -> DensityMeasure:
    return area_density(m).normalized()


def density_from_conformal(m: TriSurface, u: Union[ConformalFactor, np.ndarray]) -> DensityMeasure:
    """w_v = exp(2 u_v) * Voronoi area of v."""
    vec = _conformal_vector(m, u)
    return DensityMeasure(np.exp(2.0 * vec) * voronoi_areas(m), MeasureSupport.SURFACE)


def conformal_from_density(beta: DensityMeasure, m: TriSurface) -> ConformalFactor:
    if (beta.weights <= 0).any():
        raise ValidationError("a conformal factor needs a strictly positive density")
    return ConformalFactor(0.5 * np.log(beta.weights / voronoi_areas(m)))


def smooth_vertex_noise(m: TriSurface, rng: np.random.Generator, passes: int = 4) -> np.ndarray:
    """Random vertex field averaged over neighbours; scaled to max |value| = 1."""
    adjacency = sparse.coo_matrix(
        (
            np.ones(2 * m.n_edges),
            (
                np.concatenate([m.edges[:, 0], m.edges[:, 1]]),
                np.concatenate([m.edges[:, 1], m.edges[:, 0]]),
            ),
        ),
        shape=(m.n_vertices, m.n_vertices),
    ).tocsr()
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    field = rng.uniform(-1.0, 1.0, m.n_vertices)
    for _ in range(passes):
        field = 0.5 * field + 0.5 * (adjacency @ field) / degree
    field -= field.mean()
    peak = np.abs(field).max()
    return field / peak if peak > 0 else field


def perturbed_density(m: TriSurface, amplitude: float, seed: int = 0) -> DensityMeasure:
    """Probability density exp(amplitude * smooth noise) relative to the area measure."""
    rng = np.random.default_rng(seed)
    noise = smooth_vertex_noise(m, rng)
    w = voronoi_areas(m) * np.exp(amplitude * noise)
    return DensityMeasure(w / w.sum(), MeasureSupport.SURFACE)


# --------------------------------------------------------------------------- tensors


def tensor_pointwise_inner(h1: MetricPerturbation, h2: MetricPerturbation) -> np.ndarray:
    if h1.n_faces != h2.n_faces:
        raise ValidationError("perturbations live on different face counts")
    a, b = h1.components, h2.components
    return a[:, 0] * b[:, 0] + 2.0 * a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


def tensor_inner(h1: MetricPerturbation, h2: MetricPerturbation, m: TriSurface) -> float:
    """Integral over the surface of the frame contraction sum_ij h1_ij h2_ij."""
    if h1.n_faces != m.n_faces:
        raise ValidationError("perturbation does not match the surface faces")
    return float(np.dot(m.face_areas, tensor_pointwise_inner(h1, h2)))


def tensor_sup_norm(h: MetricPerturbation) -> float:
    """sup over faces of sqrt(<h, h>)."""
    return float(np.sqrt(tensor_pointwise_inner(h, h).max()))


def perturbed_face_metrics(h: MetricPerturbation, t: float) -> np.ndarray:
    """Chart metrics I + t h, shape (F, 2, 2)."""
    return np.eye(2)[None, :, :] + t * h.matrices()
