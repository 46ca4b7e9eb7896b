"""
First variations of normalized eigenvalues and of eigenvalue functionals.

Metric perturbations are per-face tensors in the Dirichlet chart of each face;
density perturbations are vertex vectors with the same layout as beta.
"""

import logging
from typing import Iterator, Optional, Union

import numpy as np
from scipy.stats import special_ortho_group

from src.models.functional import (
    ClusterWeights,
    DerivativeReport,
    EnergyReport,
    FiniteDifferenceReport,
    FunctionalSpec,
    HypothesisReport,
    SubgradientElement,
)
from src.models.measure import DensityMeasure, MetricPerturbation
from src.models.spectrum import AssembledProblem, Cluster, MassKind, ProblemKind, SpectrumResult
from src.models.surface import TriSurface
from src.services import eigensolver
from src.services.fem import assemble, dirichlet_geometry
from src.services.metric import perturbed_face_metrics, tensor_pointwise_inner
from src.utils.config import get_settings
from src.utils.errors import ClusterAmbiguityError, FunctionalError, ValidationError

logger = logging.getLogger(__name__)

HYPOTHESIS_RANGE = (1e-2, 1e3)


# --------------------------------------------------------------------------- functionals


def check_hypothesis(spec: FunctionalSpec, samples: int = 256, seed: int = 0) -> HypothesisReport:
    """Sample log-uniform interior points and classify every partial derivative."""
    rng = np.random.default_rng(seed)
    lo, hi = np.log(HYPOTHESIS_RANGE[0]), np.log(HYPOTHESIS_RANGE[1])
    points = np.exp(rng.uniform(lo, hi, size=(samples, spec.m)))
    partials = np.array([spec.partials(x) for x in points])

    decreasing = [bool((partials[:, i] < 0).all()) for i in range(spec.m)]
    ignored = [bool((partials[:, i] == 0).all()) for i in range(spec.m)]
    failures = []
    for i, mask in enumerate(spec.mask):
        if not (decreasing[i] or ignored[i]):
            failures.append(f"coordinate {i + 1} is neither strictly decreasing nor constant")
        elif bool(mask) != decreasing[i]:
            failures.append(f"coordinate {i + 1} does not match its declared mask")
    if not any(decreasing):
        failures.append("functional ignores every eigenvalue")
    return HypothesisReport(
        passed=not failures,
        samples=samples,
        decreasing=decreasing,
        ignored=ignored,
        failures=failures,
    )


def _used_values(spec: FunctionalSpec, s: SpectrumResult) -> np.ndarray:
    if s.k < spec.m:
        raise ValidationError(
            f"functional uses {spec.m} eigenvalues, spectrum has {s.k}",
            {"m": spec.m, "k": s.k},
        )
    return s.normalized()[1 : spec.m + 1]


def eval_E(spec: FunctionalSpec, s: SpectrumResult) -> EnergyReport:
    """E = F(lambda_bar) and E0 = F(0, lambda_bar_2, ...); infinite values propagate."""
    x = _used_values(spec, s)
    energy = spec.value(x)
    x0 = x.copy()
    x0[0] = 0.0
    energy_zero = spec.value(x0)
    gap = bool(energy < energy_zero)
    if not gap:
        logger.warning(f"gap E < E0 fails for {spec.name}: E={energy:.6g}, E0={energy_zero:.6g}")
    return EnergyReport(energy=energy, energy_zero=energy_zero, gap_holds=gap, normalized=x)


def cluster_weights(spec: FunctionalSpec, s: SpectrumResult) -> ClusterWeights:
    """
    t_i = -c dF_i(lambda_bar) with c = 1 / sum_i(-lambda_bar_i dF_i).

    ``cluster_mass`` maps each used cluster (by start index) to the sum of its t_i.
    """
    x = _used_values(spec, s)
    if (x <= 0).any():
        raise ValidationError("cluster weights need positive eigenvalues")
    partials = spec.partials(x)
    if not (partials != 0).any():
        raise FunctionalError(f"all partial derivatives of {spec.name} vanish")
    total = float(np.dot(-partials, x))
    if total <= 0:
        raise FunctionalError(f"{spec.name} is not decreasing at the current spectrum")
    c = 1.0 / total
    t = -c * partials
    cluster_mass: dict[int, float] = {}
    for i in range(1, spec.m + 1):
        start = s.cluster_of(i).start
        cluster_mass[start] = cluster_mass.get(start, 0.0) + float(t[i - 1])
    return ClusterWeights(t=t, c=c, cluster_mass=cluster_mass, partials=partials)


# --------------------------------------------------------------------------- stress


def face_gradients(m: TriSurface, vectors: np.ndarray) -> np.ndarray:
    """Per-face gradients of P1 functions in the Dirichlet chart, shape (F, K, 2)."""
    _, grads = dirichlet_geometry(m)
    values = np.asarray(vectors, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    return np.einsum("fck,fca->fka", values[m.faces], grads)


def stress_tensor(m: TriSurface, vectors: np.ndarray, weights: np.ndarray) -> MetricPerturbation:
    """Per-face sum_i w_i grad(phi_i) grad(phi_i)^T."""
    grads = face_gradients(m, vectors)
    w = np.asarray(weights, dtype=np.float64)
    return MetricPerturbation.from_matrices(np.einsum("k,fka,fkb->fab", w, grads, grads))


def trace_free(t: MetricPerturbation) -> MetricPerturbation:
    half = 0.5 * t.trace()
    comps = t.components.copy()
    comps[:, 0] -= half
    comps[:, 2] -= half
    return MetricPerturbation(comps)


def pair_variation(
    m: TriSurface, element: SubgradientElement, h: MetricPerturbation, b: np.ndarray
) -> float:
    """dE(h, b) predicted by an element: <stress, h> over Dirichlet areas plus density . b."""
    areas, _ = dirichlet_geometry(m)
    stress = float(np.dot(areas, tensor_pointwise_inner(element.stress, h)))
    return stress + float(np.dot(element.density, b))


# --------------------------------------------------------------------------- derivatives


def _check_perturbation(p: AssembledProblem, h: MetricPerturbation, b: np.ndarray) -> np.ndarray:
    m = p.surface
    if h.n_faces != m.n_faces:
        raise ValidationError(f"perturbation has {h.n_faces} faces, surface has {m.n_faces}")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (m.n_vertices,):
        raise ValidationError(
            f"density perturbation has shape {b.shape}, expected ({m.n_vertices},)"
        )
    if p.kind is ProblemKind.STEKLOV:
        off = np.ones(m.n_vertices, dtype=bool)
        off[m.boundary_vertices] = False
        if (b[off] != 0).any():
            raise ValidationError("Steklov density perturbations must live on the boundary")
    return b


def _require_resolved(s: SpectrumResult, cluster: Cluster, factor: float) -> None:
    """Refuse clusters that may merge with a neighbour or continue past the solve."""
    if s.is_truncated(cluster):
        raise ClusterAmbiguityError(
            f"cluster {cluster.start}..{cluster.end} may continue past the computed modes",
            (cluster.start, cluster.end + 1),
        )
    values = s.eigenvalues
    lo, hi = values[cluster.start], values[cluster.end]
    margin_lo = factor * s.cluster_tol * (1.0 + abs(lo))
    margin_hi = factor * s.cluster_tol * (1.0 + abs(hi))
    if cluster.start > 1 and lo - values[cluster.start - 1] <= margin_lo:
        below = s.cluster_of(cluster.start - 1)
        raise ClusterAmbiguityError(
            f"cluster {cluster.start}..{cluster.end} is within {margin_lo:.1e} of the cluster below",
            (below.start, cluster.end),
        )
    upper = values[cluster.end + 1] if cluster.end < s.k else s.next_eigenvalue
    if upper - hi <= margin_hi:
        end = s.cluster_of(cluster.end + 1).end if cluster.end < s.k else cluster.end + 1
        raise ClusterAmbiguityError(
            f"cluster {cluster.start}..{cluster.end} is within {margin_hi:.1e} of the next eigenvalue",
            (cluster.start, end),
        )


def restricted_form(
    p: AssembledProblem,
    s: SpectrumResult,
    cluster: Cluster,
    h: MetricPerturbation,
    b: np.ndarray,
) -> np.ndarray:
    """beta(1,1) (S - lambda B) + lambda b(1,1) I on the cluster eigenbasis."""
    m = p.surface
    basis = s.eigenvectors[:, cluster.start : cluster.end + 1]
    lam = float(np.mean(s.eigenvalues[cluster.start : cluster.end + 1]))
    areas, _ = dirichlet_geometry(m)
    grads = face_gradients(m, basis)
    hm = h.matrices()
    tr = h.trace()
    stress = 0.5 * np.einsum("f,fia,fja->ij", areas * tr, grads, grads) - np.einsum(
        "f,fia,fab,fjb->ij", areas, grads, hm, grads
    )
    mass = basis.T @ (b[:, None] * basis)
    form = p.total_mass * (stress - lam * mass) + lam * float(b.sum()) * np.eye(cluster.size)
    return 0.5 * (form + form.T)


def directional_derivative(
    p: AssembledProblem,
    s: SpectrumResult,
    h: MetricPerturbation,
    b: np.ndarray,
    k: int,
) -> DerivativeReport:
    """
    Right derivative of lambda_bar_k along (g + t h, beta + t b).

    The restricted form's sorted eigenvalues are the one-sided derivatives of
    the whole cluster; entry k - start belongs to lambda_bar_k.
    """
    if p.mass_kind is not MassKind.LUMPED:
        raise ValidationError("eigenvalue derivatives need a lumped mass")
    if not 1 <= k <= s.k:
        raise ValidationError(f"k={k} outside the computed spectrum 1..{s.k}")
    b = _check_perturbation(p, h, b)
    cluster = s.cluster_of(k)
    try:
        _require_resolved(s, cluster, get_settings().cluster_ambiguity_factor)
    except ClusterAmbiguityError as exc:
        logger.warning(exc.message)
        raise
    form = restricted_form(p, s, cluster, h, b)
    derivatives = np.linalg.eigvalsh(form)
    return DerivativeReport(
        k=k,
        cluster=cluster,
        form=form,
        derivatives=derivatives,
        value=float(derivatives[k - cluster.start]),
    )


def finite_difference_derivative(
    m: TriSurface,
    beta: DensityMeasure,
    kind: Union[ProblemKind, str],
    h: MetricPerturbation,
    b: np.ndarray,
    k: int,
    t: float = 1e-5,
) -> FiniteDifferenceReport:
    """
    Difference quotients of lambda_bar_k along (I + s h, beta + s b).

    Central and Richardson values track a simple eigenvalue; at a cluster the
    sorted one-sided right differences are the meaningful quantity.
    """
    kind = ProblemKind(kind)
    b = np.asarray(b, dtype=np.float64)
    if t <= 0:
        raise ValidationError("finite-difference step must be positive")
    n_dof = m.boundary_vertices.size if kind is ProblemKind.STEKLOV else m.n_vertices

    def problem(step: float) -> AssembledProblem:
        try:
            density = DensityMeasure(beta.weights + step * b, beta.support)
        except ValueError as exc:
            raise ValidationError(f"density perturbation leaves the admissible cone: {exc}") from exc
        return assemble(m, density, kind, face_metrics=perturbed_face_metrics(h, step))

    unperturbed = problem(0.0)
    _check_perturbation(unperturbed, h, b)
    base = eigensolver.solve_closed(unperturbed, k)
    cluster = base.cluster_of(k)
    top = min(cluster.end + 1, n_dof - 1)
    values = {0.0: base.normalized()}
    for step in (t, -t, 0.5 * t, -0.5 * t):
        values[step] = eigensolver.solve(problem(step), top).normalized()

    def central(step: float) -> float:
        return float((values[step][k] - values[-step][k]) / (2.0 * step))

    coarse, fine = central(t), central(0.5 * t)
    idx = list(cluster.indices)
    one_sided = np.sort((values[t][idx] - values[0.0][idx]) / t)
    return FiniteDifferenceReport(
        k=k,
        t=t,
        central=coarse,
        richardson=(4.0 * fine - coarse) / 3.0,
        one_sided=one_sided,
        cluster=cluster,
    )


# --------------------------------------------------------------------------- subgradients


def _selections(
    clusters: list[Cluster], samples: int, seed: int, cap: int
) -> Iterator[tuple[str, dict[int, np.ndarray]]]:
    """Cyclic shifts of the identity, then joint random rotations of every multiple cluster."""
    largest = max(c.size for c in clusters)
    count = 0
    for shift in range(largest):
        if count >= cap:
            return
        yield f"shift:{shift}", {
            c.start: np.roll(np.eye(c.size), shift % c.size, axis=1) for c in clusters
        }
        count += 1
    if largest == 1:
        return
    rng = np.random.default_rng(seed)
    for j in range(samples):
        if count >= cap:
            return
        rotations = {}
        for c in clusters:
            if c.size == 1:
                rotations[c.start] = np.eye(1)
            else:
                rotations[c.start] = special_ortho_group.rvs(dim=c.size, random_state=rng)
        yield f"rotation:{j}", rotations
        count += 1


def subgradient_elements(
    spec: FunctionalSpec,
    p: AssembledProblem,
    s: SpectrumResult,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> list[SubgradientElement]:
    """
    Sampled elements (stress, density) of the subdifferential of E.

    With d_i = -dF_i, each selection phi_1..phi_m (rotated within clusters)
    gives stress = beta(1,1) sum_i d_i (dphi_i (x) dphi_i - |grad phi_i|^2 / 2 g)
    and density = sum_i d_i lambda_i (beta(1,1) phi_i^2 - 1).
    """
    settings = get_settings()
    samples = settings.rotation_samples if samples is None else samples
    seed = settings.solver_seed if seed is None else seed
    x = _used_values(spec, s)
    d = -spec.partials(x)
    if not (d != 0).any():
        return []

    used = []
    for i in range(1, spec.m + 1):
        c = s.cluster_of(i)
        if c not in used:
            used.append(c)
    last = used[-1]
    if s.is_truncated(last):
        raise ClusterAmbiguityError(
            f"cluster {last.start}..{last.end} may continue past the computed modes",
            (last.start, last.end + 1),
        )

    elements = []
    for name, rotations in _selections(used, samples, seed, settings.max_hull_samples):
        columns = []
        for i in range(1, spec.m + 1):
            c = s.cluster_of(i)
            rotated = s.eigenvectors[:, c.start : c.end + 1] @ rotations[c.start]
            columns.append(rotated[:, i - c.start])
        phi = np.column_stack(columns)
        lam = s.eigenvalues[1 : spec.m + 1]
        stress = trace_free(stress_tensor(p.surface, phi, d)).scaled(p.total_mass)
        density = (p.total_mass * phi**2 - 1.0) @ (d * lam)
        if p.kind is ProblemKind.STEKLOV:
            density = np.where(p.mass > 0, density, 0.0)
        elements.append(
            SubgradientElement(
                stress=stress,
                density=density,
                selection=name,
                d=d,
                rotations=rotations,
            )
        )
    logger.debug(f"{len(elements)} subgradient elements over clusters {[c.size for c in used]}")
    return elements
