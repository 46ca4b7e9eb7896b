"""
Generalized symmetric eigensolver for assembled Laplace and Steklov problems.

The constant mode is pinned as lambda_0 = 0. Nonconstant modes are kept
beta-orthogonal to constants, beta-orthonormal, Rayleigh-Ritz refreshed and
sign-normalized so that repeated solves return identical vectors.
"""

import logging
from typing import Optional

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from src.models.spectrum import (
    AssembledProblem,
    MinMaxReport,
    ProblemKind,
    SpectrumResult,
    cluster_values,
)
from src.utils.config import get_settings
from src.utils.errors import SolverError, ValidationError

logger = logging.getLogger(__name__)

METHODS = ("auto", "dense", "sparse")


def _dense(matrix) -> np.ndarray:
    return matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix)


def _deflate_constants(p: AssembledProblem, vectors: np.ndarray) -> np.ndarray:
    ones = np.ones(p.dimension)
    coeff = p.pair(ones, vectors) / p.total_mass
    return vectors - np.outer(ones, coeff)


def _rayleigh_ritz(p: AssembledProblem, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormalize a block in the beta pairing and diagonalize K on its span."""
    vectors = _deflate_constants(p, vectors)
    gram = p.pair(vectors, vectors)
    gram = 0.5 * (gram + gram.T)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SolverError("eigenvector block lost rank during orthonormalization") from exc
    basis = scipy.linalg.solve_triangular(chol, vectors.T, lower=True).T
    projected = basis.T @ (p.stiffness @ basis)
    values, rotation = np.linalg.eigh(0.5 * (projected + projected.T))
    return values, basis @ rotation


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _relative_residuals(p: AssembledProblem, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    kv = p.stiffness @ vectors
    mv = p.mass_matrix @ vectors
    res = np.linalg.norm(kv - mv * values, axis=0)
    scale = np.linalg.norm(kv, axis=0)
    return res / np.where(scale > 0, scale, 1.0)


def _laplace_dense(p: AssembledProblem) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = scipy.linalg.eigh(_dense(p.stiffness), _dense(p.mass_matrix))
    return values, vectors


def _laplace_sparse(p: AssembledProblem, n_modes: int, seed: int, max_iter: Optional[int]):
    rng = np.random.default_rng(seed)
    sigma = -1.0 / p.total_mass
    try:
        values, vectors = eigsh(
            p.stiffness.tocsc(),
            k=n_modes,
            M=p.mass_matrix.tocsc(),
            sigma=sigma,
            which="LM",
            v0=rng.standard_normal(p.dimension),
            maxiter=max_iter,
        )
    except Exception as exc:  # ARPACK raises its own exception family
        raise SolverError(f"sparse eigensolver failed: {exc}") from exc
    order = np.argsort(values)
    return values[order], vectors[:, order]


def _steklov(p: AssembledProblem) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet-to-Neumann reduction onto the boundary, then harmonic extension."""
    boundary = p.support
    interior = np.setdiff1d(np.arange(p.dimension), boundary)
    k = p.stiffness.tocsr()
    k_bb = _dense(k[boundary][:, boundary])
    if interior.size:
        k_ii = k[interior][:, interior].tocsc()
        k_ib = _dense(k[interior][:, boundary])
        lu = splu(k_ii)
        solved = lu.solve(k_ib)
        schur = k_bb - k_ib.T @ solved
    else:
        solved = np.zeros((0, boundary.size))
        schur = k_bb
    schur = 0.5 * (schur + schur.T)
    values, boundary_vectors = scipy.linalg.eigh(schur, np.diag(p.mass[boundary]))
    vectors = np.zeros((p.dimension, len(values)))
    vectors[boundary] = boundary_vectors
    if interior.size:
        vectors[interior] = -solved @ boundary_vectors
    return values, vectors


def _refine(p: AssembledProblem, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One shift-invert subspace iteration followed by Rayleigh-Ritz."""
    sigma = -1.0 / p.total_mass
    shifted = (p.stiffness - sigma * p.mass_matrix).tocsc()
    lu = splu(shifted)
    improved = lu.solve(np.asarray(p.mass_matrix @ vectors))
    return _rayleigh_ritz(p, improved)


def solve(
    p: AssembledProblem,
    k: int,
    tol: Optional[float] = None,
    method: str = "auto",
    cluster_tol: Optional[float] = None,
    padding: Optional[int] = None,
    seed: Optional[int] = None,
) -> SpectrumResult:
    """
    First k+1 eigenpairs of K phi = lambda M phi.

    ``method`` picks the dense or sparse Laplace path; "auto" uses the dense
    solver up to the configured threshold. Steklov always uses the boundary
    reduction.
    """
    settings = get_settings()
    tol = settings.eigen_tol if tol is None else tol
    cluster_tol = settings.cluster_tol if cluster_tol is None else cluster_tol
    padding = settings.eigen_padding if padding is None else padding
    seed = settings.solver_seed if seed is None else seed
    if method not in METHODS:
        raise ValidationError(f"unknown solver method '{method}'")
    if tol <= 0:
        raise ValidationError("solver tolerance must be positive")
    n_dof = p.support.size if p.kind is ProblemKind.STEKLOV else p.dimension
    if k < 1 or k >= n_dof:
        raise ValidationError(f"k={k} must lie in [1, {n_dof - 1}]", {"k": k, "dimension": n_dof})

    if p.kind is ProblemKind.STEKLOV:
        used = "steklov"
        values, vectors = _steklov(p)
    else:
        dense = method == "dense" or (method == "auto" and p.dimension <= settings.dense_threshold)
        if dense:
            used = "dense"
            values, vectors = _laplace_dense(p)
        else:
            used = "sparse"
            n_modes = min(k + 1 + padding, p.dimension - 1)
            values, vectors = _laplace_sparse(p, n_modes, seed, settings.eigen_max_iter)

    # column 0 is the constant mode on a connected surface
    ritz_values, ritz_vectors = _rayleigh_ritz(p, vectors[:, 1:])
    next_value = float(ritz_values[k]) if len(ritz_values) > k else float("inf")
    values = ritz_values[:k]
    vectors = ritz_vectors[:, :k]

    residuals = _relative_residuals(p, values, vectors)
    if residuals.max() > tol:
        logger.debug(f"residual {residuals.max():.2e} above {tol:.1e}, refining")
        values, vectors = _refine(p, vectors)
        residuals = _relative_residuals(p, values, vectors)
        if residuals.max() > tol:
            logger.error(f"eigensolver residual {residuals.max():.2e} exceeds tolerance {tol:.1e}")
            raise SolverError(
                f"eigensolver residual {residuals.max():.2e} exceeds tolerance {tol:.1e}",
                {"residuals": residuals.tolist(), "tol": tol},
            )
    vectors = _normalize_signs(vectors)

    constant = np.full((p.dimension, 1), 1.0 / np.sqrt(p.total_mass))
    all_values = np.concatenate([[0.0], values])
    all_vectors = np.hstack([constant, vectors])
    gram = p.pair(all_vectors, all_vectors)
    defect = float(np.abs(gram - np.eye(k + 1)).max())

    result = SpectrumResult(
        kind=p.kind,
        eigenvalues=all_values,
        eigenvectors=all_vectors,
        residuals=np.concatenate([[0.0], residuals]),
        orthonormality_defect=defect,
        clusters=cluster_values(all_values, cluster_tol),
        total_mass=p.total_mass,
        tolerance=tol,
        cluster_tol=cluster_tol,
        next_eigenvalue=next_value,
        method=used,
    )
    last = result.clusters[-1]
    if result.is_truncated(last):
        result.notes.append(f"cluster {last.start}..{last.end} may continue past k={k}")
    logger.debug(f"Solved {result.summary()}")
    return result


def solve_closed(p: AssembledProblem, k: int, **kwargs) -> SpectrumResult:
    """Solve with enough extra modes that the cluster containing k is not cut off."""
    n_dof = p.support.size if p.kind is ProblemKind.STEKLOV else p.dimension
    kk = min(k + 1, n_dof - 1)
    while True:
        s = solve(p, kk, **kwargs)
        if kk >= n_dof - 1 or not s.is_truncated(s.cluster_of(k)):
            return s
        kk = min(kk + 2, n_dof - 1)


def normalized(s: SpectrumResult) -> np.ndarray:
    return s.normalized()


def clusters(s: SpectrumResult):
    return s.clusters


def rayleigh_minmax_check(
    p: AssembledProblem,
    s: SpectrumResult,
    trials: int = 100,
    seed: Optional[int] = None,
    dense_limit: int = 300,
) -> MinMaxReport:
    """
    Check the solved spectrum against the min-max characterization.

    Dense agreement is checked on small problems; random k-dimensional
    subspaces of the beta-mean-zero space must have max Rayleigh quotient at
    least lambda_k, and the span of phi_1..phi_k must attain it.
    """
    settings = get_settings()
    seed = settings.solver_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    k = s.k
    lam_k = float(s.eigenvalues[k])
    slack = 1e-10 * max(1.0, abs(lam_k))
    defects = []

    dense_error = None
    if p.kind is ProblemKind.LAPLACE and p.dimension <= dense_limit:
        reference, _ = _laplace_dense(p)
        ref = reference[1 : k + 1]
        got = s.eigenvalues[1:]
        dense_error = float((np.abs(ref - got) / np.maximum(1.0, np.abs(ref))).max())
        if dense_error > 1e-8:
            defects.append(f"dense and returned spectra differ by {dense_error:.2e}")

    def max_quotient(block: np.ndarray) -> float:
        block = _deflate_constants(p, block)
        a = block.T @ (p.stiffness @ block)
        b = p.pair(block, block)
        return float(scipy.linalg.eigh(0.5 * (a + a.T), 0.5 * (b + b.T), eigvals_only=True)[-1])

    achieving_gap = abs(max_quotient(s.eigenvectors[:, 1 : k + 1]) - lam_k)
    if achieving_gap > slack:
        defects.append(f"span of phi_1..phi_k attains {achieving_gap:.2e} off lambda_k")

    margins = []
    for _ in range(trials):
        block = rng.standard_normal((p.dimension, k))
        margins.append(max_quotient(block) - lam_k)
    margins = np.asarray(margins)
    violations = int((margins < -slack).sum())
    if violations:
        defects.append(f"{violations} of {trials} random subspaces fall below lambda_k")

    report = MinMaxReport(
        k=k,
        trials=trials,
        dense_relative_error=dense_error,
        achieving_gap=float(achieving_gap),
        min_margin=float(margins.min()) if trials else float("inf"),
        violations=violations,
        defects=defects,
    )
    for msg in defects:
        logger.error(f"min-max check: {msg}")
    return report
