"""
Eigenmap certificates: harmonicity, conformality and normalization defects.

A certificate maps the surface into R^n through solved eigenvectors, scaled
so that the beta-mass of each used cluster matches the weights t_i of the
functional. An extremal metric makes the map conformal with |Phi|^2_Lambda = 1.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.stats import special_ortho_group

from src.models.certificate import ConformalityReport, EigenmapCertificate, ProbeResult
from src.models.functional import ClusterWeights
from src.models.spectrum import AssembledProblem, Cluster, MassKind, SpectrumResult
from src.models.surface import TriSurface
from src.services.variation import stress_tensor, trace_free
from src.utils.config import get_settings
from src.utils.errors import ClusterAmbiguityError, ValidationError

logger = logging.getLogger(__name__)

MAX_DESCENT_SWEEPS = 40
MIN_ANGLE = 1e-4
ZERO_ENERGY = 1e-12


class _ClusterState:
    """Rotation Q and mass split a of one cluster; rotated = psi @ Q."""

    def __init__(self, psi: np.ndarray, lam: float, q: np.ndarray, a: np.ndarray):
        self.psi = psi
        self.lam = lam
        self.q = q
        self.a = a
        self.rotated = psi @ q

    def contribution(self) -> np.ndarray:
        return self.lam * (self.rotated**2 @ self.a)

    def copy(self) -> "_ClusterState":
        return _ClusterState(self.psi, self.lam, self.q.copy(), self.a.copy())


def _sup(field: np.ndarray, support: np.ndarray) -> float:
    return float(np.abs(field[support]).max())


def _descend(states: list[_ClusterState], support: np.ndarray) -> float:
    """Coordinate descent over Givens rotations and pairwise mass transfers."""
    total = sum(st.contribution() for st in states) - 1.0
    best = _sup(total, support)
    angle = 0.25
    transfer = 0.25
    for _ in range(MAX_DESCENT_SWEEPS):
        improved = False
        for st in states:
            r = st.a.size
            if r < 2:
                continue
            for i in range(r):
                for j in range(i + 1, r):
                    base = total - st.contribution()
                    for theta in (angle, -angle):
                        c, s = np.cos(theta), np.sin(theta)
                        ci = c * st.rotated[:, i] + s * st.rotated[:, j]
                        cj = -s * st.rotated[:, i] + c * st.rotated[:, j]
                        trial = st.rotated.copy()
                        trial[:, i], trial[:, j] = ci, cj
                        field = base + st.lam * (trial**2 @ st.a)
                        value = _sup(field, support)
                        if value < best:
                            givens = np.eye(r)
                            givens[[i, i, j, j], [i, j, i, j]] = [c, -s, s, c]
                            st.q = st.q @ givens
                            st.rotated = trial
                            total, best, improved = field, value, True
                            break
                    base = total - st.contribution()
                    mass = st.a.sum()
                    for delta in (transfer * mass / r, -transfer * mass / r):
                        a = st.a.copy()
                        a[i] += delta
                        a[j] -= delta
                        if a[i] < 0 or a[j] < 0:
                            continue
                        field = base + st.lam * (st.rotated**2 @ a)
                        value = _sup(field, support)
                        if value < best:
                            st.a = a
                            total, best, improved = field, value, True
                            break
        if not improved:
            angle *= 0.5
            transfer *= 0.5
            if angle < MIN_ANGLE:
                break
    return best


def _used_clusters(s: SpectrumResult, weights: ClusterWeights) -> list[Cluster]:
    clusters = [s.cluster_of(start) for start in sorted(weights.cluster_mass)]
    last = clusters[-1]
    if s.is_truncated(last):
        raise ClusterAmbiguityError(
            f"cluster {last.start}..{last.end} may continue past the computed modes",
            (last.start, last.end + 1),
        )
    return clusters


def _harmonic_residuals(p: AssembledProblem, phi: np.ndarray, lam_phi: np.ndarray) -> np.ndarray:
    k_phi = p.stiffness @ phi
    res = np.linalg.norm(k_phi - p.mass_matrix @ lam_phi, axis=0)
    scale = np.linalg.norm(k_phi, axis=0)
    return res / np.where(scale > 0, scale, 1.0)


def _vertex_energy(m: TriSurface, energy: np.ndarray) -> np.ndarray:
    """Area-weighted average over incident faces of a per-face field."""
    areas = m.face_areas
    num = np.zeros(m.n_vertices)
    den = np.zeros(m.n_vertices)
    for c in range(3):
        np.add.at(num, m.faces[:, c], areas * energy)
        np.add.at(den, m.faces[:, c], areas)
    return num / np.where(den > 0, den, 1.0)


def _finish(
    p: AssembledProblem,
    s: SpectrumResult,
    indices: list[int],
    coefficients: np.ndarray,
    eigenvalues: np.ndarray,
    lam_phi: np.ndarray,
    weights: np.ndarray,
    cluster_mass: dict[int, float],
    raw_sup: float,
    feasible: bool,
    notes: list[str],
) -> EigenmapCertificate:
    m = p.surface
    phi = s.eigenvectors[:, indices] @ coefficients
    support = p.support
    defect = np.zeros(m.n_vertices)
    defect[support] = ((phi[support] ** 2) @ eigenvalues) - 1.0
    w = p.mass
    face_energy = stress_tensor(m, phi, np.ones(phi.shape[1])).trace()
    energy = _vertex_energy(m, face_energy)
    area_mean = float(np.dot(m.face_areas, face_energy)) / m.total_area
    floor = get_settings().branch_floor * area_mean
    return EigenmapCertificate(
        kind=p.kind,
        indices=indices,
        eigenvalues=eigenvalues,
        coefficients=coefficients,
        components=phi,
        weights=weights,
        cluster_mass=cluster_mass,
        harmonic_residuals=_harmonic_residuals(p, phi, lam_phi),
        normalization_defect=defect,
        support=support,
        raw_normalization_sup=raw_sup,
        normalization_sup=_sup(defect, support),
        normalization_l1=float(np.dot(w[support], np.abs(defect[support]))),
        normalization_mean=float(np.dot(w, defect) / w.sum()),
        branch_candidates=np.nonzero(energy < floor)[0],
        energy_density=energy,
        total_mass=p.total_mass,
        feasible=feasible,
        notes=notes,
    )


def build_eigenmap(
    p: AssembledProblem,
    s: SpectrumResult,
    weights: ClusterWeights,
    seed: Optional[int] = None,
    starts: Optional[int] = None,
) -> EigenmapCertificate:
    """
    Eigenmap whose cluster masses follow ``weights``.

    Cluster C receives beta-mass T_C * beta(1,1) and Lambda_C is the
    t-weighted mean of its normalized eigenvalues, so the normalization defect
    has beta-mean zero. Inside each cluster the rotation and mass split are
    chosen to minimize the sup of the defect: the raw eigenvectors with equal
    masses, then random starts, each refined by coordinate descent.
    """
    if p.mass_kind is not MassKind.LUMPED:
        raise ValidationError("eigenmap certificates need a lumped mass")
    settings = get_settings()
    seed = settings.solver_seed if seed is None else seed
    starts = settings.certificate_starts if starts is None else starts
    clusters = _used_clusters(s, weights)
    beta11 = s.total_mass
    normalized = s.normalized()
    t = np.asarray(weights.t, dtype=np.float64)

    feasible = True
    notes: list[str] = []
    states = []
    for c in clusters:
        mass = weights.cluster_mass[c.start]
        used = [i for i in c.indices if i <= t.size]
        if mass > 0:
            lam = float(sum(t[i - 1] * normalized[i] for i in used) / mass)
        else:
            feasible = False
            notes.append(f"cluster {c.start}..{c.end} has no allocated mass")
            lam = float(np.mean(normalized[c.start : c.end + 1]))
            mass = 0.0
        psi = s.eigenvectors[:, c.start : c.end + 1]
        a = np.full(c.size, mass * beta11 / c.size)
        states.append(_ClusterState(psi, lam, np.eye(c.size), a))

    support = p.support
    raw_sup = _sup(sum(st.contribution() for st in states) - 1.0, support)
    best_states = [st.copy() for st in states]
    best = _descend(best_states, support)
    if any(st.a.size > 1 for st in states):
        rng = np.random.default_rng(seed)
        for _ in range(max(starts - 1, 0)):
            trial = []
            for st in states:
                r = st.a.size
                if r == 1:
                    trial.append(st.copy())
                    continue
                q = special_ortho_group.rvs(dim=r, random_state=rng)
                a = rng.dirichlet(np.ones(r)) * st.a.sum()
                trial.append(_ClusterState(st.psi, st.lam, q, a))
            value = _descend(trial, support)
            if value < best:
                best, best_states = value, trial
    logger.debug(f"eigenmap normalization sup {raw_sup:.3e} raw, {best:.3e} refined")

    indices = [i for c in clusters for i in c.indices]
    coefficients = block_diag(*[st.q * np.sqrt(st.a)[None, :] for st in best_states])
    eigenvalues = np.concatenate([np.full(st.a.size, st.lam) for st in best_states])
    lam_phi = s.eigenvectors[:, indices] @ (s.eigenvalues[indices][:, None] * coefficients)
    return _finish(
        p,
        s,
        indices,
        coefficients,
        eigenvalues,
        lam_phi,
        t,
        dict(weights.cluster_mass),
        raw_sup,
        feasible,
        notes,
    )


def random_mixing_map(
    p: AssembledProblem, s: SpectrumResult, modes: Sequence[int], seed: Optional[int] = None
) -> EigenmapCertificate:
    """Random orthogonal mixing of the given modes with random masses, as a baseline map."""
    seed = get_settings().solver_seed if seed is None else seed
    modes = [int(i) for i in modes]
    if not modes or min(modes) < 1 or max(modes) > s.k:
        raise ValidationError(f"mixing modes {modes} must lie in 1..{s.k}")
    rng = np.random.default_rng(seed)
    r = len(modes)
    q = special_ortho_group.rvs(dim=r, random_state=rng) if r > 1 else np.eye(1)
    a = rng.dirichlet(np.ones(r)) if r > 1 else np.ones(1)
    normalized = s.normalized()[modes]
    eigenvalues = (q**2).T @ normalized
    a = a / float(np.dot(a, eigenvalues))
    a *= s.total_mass
    coefficients = q * np.sqrt(a)[None, :]
    phi = s.eigenvectors[:, modes] @ coefficients
    lam_phi = phi * (eigenvalues / s.total_mass)[None, :]
    return _finish(
        p,
        s,
        modes,
        coefficients,
        eigenvalues,
        lam_phi,
        a / s.total_mass,
        {},
        float("nan"),
        True,
        ["random orthogonal mixing baseline"],
    )


def conformality_defect(c: EigenmapCertificate, m: TriSurface) -> ConformalityReport:
    """
    Per face sqrt(2) |T - tr(T)/2 I|_F / tr(T) with T = sum_i dPhi_i (x) dPhi_i.

    The value is 0 for a conformal map and 1 for a single component. Faces
    where T vanishes count as 0 and are listed.
    """
    if c.components.shape[0] != m.n_vertices:
        raise ValidationError("certificate does not belong to this surface")
    tensor = stress_tensor(m, c.components, np.ones(c.n_components))
    trace = tensor.trace()
    free = trace_free(tensor).components
    norm = np.sqrt(free[:, 0] ** 2 + 2.0 * free[:, 1] ** 2 + free[:, 2] ** 2)
    scale = max(float(trace.mean()), np.finfo(float).tiny)
    zero = trace <= ZERO_ENERGY * scale
    per_face = np.zeros(m.n_faces)
    per_face[~zero] = np.sqrt(2.0) * norm[~zero] / trace[~zero]
    areas = m.face_areas
    return ConformalityReport(
        per_face=per_face,
        mean=float(np.dot(areas, per_face) / areas.sum()),
        sup=float(per_face.max()),
        l1=float(np.dot(areas, per_face)),
        zero_energy_faces=np.nonzero(zero)[0],
    )


def pair_identification_probe(c: EigenmapCertificate, p: int, q: int) -> ProbeResult:
    """|Phi(p) - Phi(q)| (plain and Lambda-weighted) and |grad Phi| at both vertices."""
    n = c.components.shape[0]
    for v in (p, q):
        if not 0 <= v < n:
            raise ValidationError(f"vertex {v} outside 0..{n - 1}")
    diff = c.components[p] - c.components[q]
    candidates = set(int(v) for v in c.branch_candidates)
    return ProbeResult(
        p=p,
        q=q,
        distance=float(np.linalg.norm(diff)),
        normalized_distance=float(np.sqrt(np.dot(c.eigenvalues, diff**2))),
        gradient_p=float(np.sqrt(c.energy_density[p])),
        gradient_q=float(np.sqrt(c.energy_density[q])),
        branch_p=p in candidates,
        branch_q=q in candidates,
    )
