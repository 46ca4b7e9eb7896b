"""
Nonsmooth descent of eigenvalue functionals over vertex densities.

Each iterate is a probability density w on the vertices. A step moves either
w directly (projected back onto the simplex) or the conformal factor u with
w = exp(2u) * Voronoi / Z. The direction is the negative minimal-norm element
of the convex hull of sampled subgradients; a step is kept only if it strictly
decreases the objective.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from src.models.functional import EnergyReport, FunctionalSpec
from src.models.measure import DensityMeasure, MeasureSupport
from src.models.run import (
    IterateRecord,
    MoveSet,
    OptimizerConfig,
    OptimRun,
    RunFile,
    TerminationReason,
)
from src.models.spectrum import AssembledProblem, ProblemKind, SpectrumResult
from src.models.surface import TriSurface
from src.services import eigensolver
from src.services.builtin_surfaces import surface_from_source
from src.services.certificates import build_eigenmap, conformality_defect
from src.services.fem import assemble
from src.services.metric import (
    area_density,
    conformal_from_density,
    smooth_vertex_noise,
    uniform_probability,
    voronoi_areas,
)
from src.services.variation import check_hypothesis, cluster_weights, eval_E, subgradient_elements
from src.utils.config import get_settings
from src.utils.errors import FunctionalError, NumericalError, ValidationError
from src.utils.serialization import read_json

logger = logging.getLogger(__name__)

IterateCallback = Callable[[IterateRecord], None]


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def floor_density(w: np.ndarray, floor: Optional[float] = None) -> np.ndarray:
    """Raise entries to floor * mean and renormalize to total mass one."""
    floor = get_settings().density_floor if floor is None else floor
    w = np.asarray(w, dtype=np.float64)
    w = np.maximum(w, floor * w.mean())
    return w / w.sum()


def min_norm_hull(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Convex weights alpha minimizing |alpha @ vectors|, and that element."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n = vectors.shape[0]
    if n == 1:
        return np.ones(1), vectors[0].copy()
    gram = vectors @ vectors.T
    scale = float(np.diag(gram).max())
    if scale <= 0:
        return np.full(n, 1.0 / n), np.zeros(vectors.shape[1])
    q = gram / scale
    result = minimize(
        lambda a: 0.5 * a @ q @ a,
        x0=np.full(n, 1.0 / n),
        jac=lambda a: q @ a,
        bounds=[(0.0, None)] * n,
        constraints=[{"type": "eq", "fun": lambda a: a.sum() - 1.0, "jac": lambda a: np.ones(n)}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    if not result.success:
        logger.debug(f"min-norm hull: SLSQP stopped with '{result.message}'")
    alpha = project_simplex(result.x)
    return alpha, alpha @ vectors


@dataclass
class _Iterate:
    weights: np.ndarray
    problem: AssembledProblem
    spectrum: SpectrumResult
    energy: EnergyReport

    @property
    def objective(self) -> float:
        return self.energy.energy


@dataclass
class _Descent:
    gradients: np.ndarray
    direction: np.ndarray
    defect: float


def _evaluate(m: TriSurface, spec: FunctionalSpec, weights: np.ndarray, k: int) -> _Iterate:
    p = assemble(m, DensityMeasure(weights, MeasureSupport.SURFACE), ProblemKind.LAPLACE)
    s = eigensolver.solve_closed(p, k)
    return _Iterate(weights=weights, problem=p, spectrum=s, energy=eval_E(spec, s))


def _descent(it: _Iterate, spec: FunctionalSpec, cfg: OptimizerConfig, seed: int) -> _Descent:
    elements = subgradient_elements(
        spec, it.problem, it.spectrum, samples=cfg.samples_per_cluster, seed=seed
    )
    n = it.weights.size
    if not elements:
        zeros = np.zeros((1, n))
        return _Descent(gradients=zeros, direction=zeros[0], defect=0.0)
    gradients = np.array([e.density - e.density.mean() for e in elements])
    _, g_min = min_norm_hull(gradients)
    c = cluster_weights(spec, it.spectrum).c
    defect = c * float(np.linalg.norm(g_min)) / math.sqrt(n)
    return _Descent(gradients=gradients, direction=g_min, defect=defect)


def _move_for(moves: MoveSet, iteration: int) -> MoveSet:
    if moves is MoveSet.BOTH:
        return MoveSet.DENSITY if iteration % 2 == 1 else MoveSet.CONFORMAL
    return moves


def _propose(
    move: MoveSet, w: np.ndarray, descent: _Descent, step: float, vor: np.ndarray
) -> tuple[np.ndarray, float]:
    """Trial density and the Euclidean size of the move."""
    n = w.size
    if move is MoveSet.DENSITY:
        g = descent.direction
        norm = np.linalg.norm(g)
        if norm == 0:
            return w.copy(), 0.0
        trial = floor_density(project_simplex(w - step * g / (norm * math.sqrt(n))))
        return trial, float(np.linalg.norm(trial - w))
    # chain rule through w = exp(2u) vor / Z
    u_grads = np.array([2.0 * w * (g - np.dot(w, g)) for g in descent.gradients])
    _, g_u = min_norm_hull(u_grads)
    norm = np.linalg.norm(g_u)
    if norm == 0:
        return w.copy(), 0.0
    u = 0.5 * np.log(w / vor)
    du = -step * math.sqrt(n) * g_u / norm
    u_new = u + du
    raw = np.exp(2.0 * (u_new - u_new.max())) * vor
    return floor_density(raw / raw.sum()), float(np.linalg.norm(du))


def _record(
    iteration: int,
    it: _Iterate,
    spec: FunctionalSpec,
    step: float,
    step_norm: float,
    accepted: bool,
    defect: float,
    move: str,
) -> IterateRecord:
    return IterateRecord(
        iteration=iteration,
        objective=it.objective,
        normalized=[float(x) for x in it.energy.normalized],
        step=step,
        step_norm=step_norm,
        accepted=accepted,
        defect=defect,
        clusters=[c.size for c in it.spectrum.clusters[1:] if c.start <= spec.m],
        gap_holds=it.energy.gap_holds,
        move=move,
    )


def minimize_E(
    m: TriSurface,
    cfg: OptimizerConfig,
    init: DensityMeasure,
    seed: Optional[int] = None,
    callback: Optional[IterateCallback] = None,
) -> OptimRun:
    """
    Minimize E = F(lambda_bar_1..m) over probability densities on ``m``.

    ``callback`` receives every record as it is produced, so histories can be
    streamed. Stalls and iteration caps are termination reasons, not errors.
    """
    settings = get_settings()
    seed = settings.solver_seed if seed is None else seed
    spec = cfg.functional
    hypothesis = check_hypothesis(spec, seed=seed)
    if not hypothesis.passed:
        raise FunctionalError(
            f"{spec.name} fails the monotonicity hypothesis: {'; '.join(hypothesis.failures)}",
            hypothesis.to_dict(),
        )
    if init.n_vertices != m.n_vertices:
        raise ValidationError(
            f"initial density has {init.n_vertices} entries, surface has {m.n_vertices} vertices"
        )
    if init.total_mass <= 0:
        raise ValidationError("initial density has no mass")

    k = min(spec.m + cfg.k_extra, m.n_vertices - 1)
    vor = voronoi_areas(m)
    history: list[IterateRecord] = []
    warnings: list[str] = []

    def emit(record: IterateRecord) -> None:
        history.append(record)
        if callback is not None:
            callback(record)

    current = _evaluate(m, spec, floor_density(init.weights), k)
    if not current.energy.gap_holds:
        msg = f"gap E < E0 fails at the initial density (E={current.objective:.6g}, E0={current.energy.energy_zero:.6g})"
        logger.warning(msg)
        warnings.append(msg)
    descent = _descent(current, spec, cfg, seed)
    step = cfg.initial_step
    emit(_record(0, current, spec, step, 0.0, True, descent.defect, "init"))
    logger.info(
        f"Starting {spec.name} descent on {m.name or 'surface'}: E={current.objective:.8g}, "
        f"defect={descent.defect:.3e}"
    )

    iteration = 0
    while True:
        if descent.defect < cfg.defect_tol:
            termination = TerminationReason.CONVERGED
            break
        if iteration >= cfg.max_iterations:
            termination = TerminationReason.MAX_ITERATIONS
            break
        iteration += 1
        move = _move_for(cfg.moves, iteration)
        trial_w, step_norm = _propose(move, current.weights, descent, step, vor)
        trial = None
        try:
            trial = _evaluate(m, spec, trial_w, k)
        except NumericalError as exc:
            logger.warning(f"iteration {iteration}: trial solve failed ({exc.message}), backtracking")
        accepted = trial is not None and trial.objective < current.objective
        change = 0.0
        if accepted:
            change = current.objective - trial.objective
            current = trial
            descent = _descent(current, spec, cfg, seed)
            step = min(step * cfg.growth, cfg.initial_step)
        else:
            step *= cfg.backtrack
        emit(_record(iteration, current, spec, step, step_norm, accepted, descent.defect, move.value))
        logger.debug(
            f"iteration {iteration} {move.value}: E={current.objective:.10g} "
            f"accepted={accepted} step={step:.3e} defect={descent.defect:.3e}",
            extra={"iteration": iteration},
        )
        if accepted and cfg.objective_tol > 0:
            if change <= cfg.objective_tol * max(abs(current.objective), 1e-300):
                termination = TerminationReason.OBJECTIVE_PLATEAU
                break
        if not accepted and step < cfg.min_step:
            termination = TerminationReason.STALLED
            break

    run = OptimRun(
        config=cfg,
        functional=spec,
        history=history,
        final_density=current.problem.density,
        final_spectrum=current.spectrum,
        objective=current.objective,
        termination=termination,
        final_conformal=conformal_from_density(current.problem.density, m),
        concentration=float(current.weights.max() / current.weights.mean()),
        warnings=warnings,
    )
    run.defects = _final_defects(current, spec, descent, seed, warnings)
    logger.info(
        f"Finished {spec.name}: E={run.objective:.8g} after {iteration} iterations "
        f"({termination.value}), defect={descent.defect:.3e}"
    )
    return run


def _final_defects(
    it: _Iterate, spec: FunctionalSpec, descent: _Descent, seed: int, warnings: list[str]
) -> dict[str, float]:
    defects = {"stationarity": descent.defect}
    try:
        cert = build_eigenmap(it.problem, it.spectrum, cluster_weights(spec, it.spectrum), seed=seed)
        defects["normalization_sup"] = cert.normalization_sup
        defects["conformality_mean"] = conformality_defect(cert, it.problem.surface).mean
    except (NumericalError, ValidationError) as exc:
        msg = f"final eigenmap certificate unavailable: {exc.message}"
        logger.warning(msg)
        warnings.append(msg)
    return defects


def maximize_lambda1(
    m: TriSurface,
    cfg: OptimizerConfig,
    init: DensityMeasure,
    seed: Optional[int] = None,
    callback: Optional[IterateCallback] = None,
) -> OptimRun:
    """minimize_E with F = 1 / lambda_bar_1."""
    return minimize_E(m, cfg.model_copy(update={"objective": "inv1"}), init, seed, callback)


# --------------------------------------------------------------------------- run files


def density_from_source(m: TriSurface, source: str) -> DensityMeasure:
    """``uniform`` (area probability), ``area``, or a density JSON path."""
    if source == "uniform":
        return uniform_probability(m)
    if source == "area":
        return area_density(m)
    try:
        beta = DensityMeasure.from_dict(read_json(source))
    except FileNotFoundError as exc:
        raise ValidationError(f"density file {source} not found") from exc
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"density file {source} is malformed: {exc}") from exc
    if beta.n_vertices != m.n_vertices:
        raise ValidationError(
            f"density has {beta.n_vertices} entries, surface has {m.n_vertices} vertices"
        )
    return beta


def initial_density(m: TriSurface, run: RunFile) -> DensityMeasure:
    beta = density_from_source(m, run.run.density)
    if run.run.init == "perturbed" and run.run.perturbation > 0:
        noise = smooth_vertex_noise(m, np.random.default_rng(run.run.seed))
        w = beta.weights * np.exp(run.run.perturbation * noise)
        beta = DensityMeasure(w, beta.support)
    return beta.normalized()


def run_from_file(
    run: RunFile, seed: Optional[int] = None, callback: Optional[IterateCallback] = None
) -> tuple[TriSurface, OptimRun]:
    """Load the surface and density a run file names and optimize."""
    if seed is not None:
        run = run.model_copy(update={"run": run.run.model_copy(update={"seed": seed})})
    m = surface_from_source(run.run.mesh)
    init = initial_density(m, run)
    return m, minimize_E(m, run.optimizer, init, seed=run.run.seed, callback=callback)
