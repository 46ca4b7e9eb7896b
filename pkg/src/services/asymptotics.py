"""
Numerical checks of the gluing estimates.

Handle and strip sweeps measure how eigenvalues move as a neck of width eps
shrinks; the capacity and extension helpers measure the two analytic
ingredients the estimates rest on.
"""

import logging
from functools import partial
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from src.models.certificate import CapacityReport, ExtensionReport
from src.models.run import SweepRecord
from src.models.spectrum import ProblemKind, SpectrumResult
from src.models.surface import TriSurface
from src.services.builtin_surfaces import cylinder, polar_disk
from src.services.eigensolver import solve
from src.services.fem import assemble, dirichlet_geometry, harmonic_extension, stiffness_matrix
from src.services.metric import area_density, boundary_density
from src.services.surgery import attach_handle, attach_strip, excise_disks
from src.services.sweep import sweep
from src.services.topology import graph_distances
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

MIN_NECK_RINGS = 8
MIN_ANNULUS_RINGS = 3
SUP_GROWTH_WINDOW = (0.0, 0.75)
EXTENSION_DISK_RMIN = 1e-2


def neumann_spectrum(m: TriSurface, k: int) -> SpectrumResult:
    """Free-boundary Laplace spectrum with the area measure; mu_0 = 0."""
    if m.is_closed:
        raise ValidationError("Neumann spectrum needs a surface with boundary")
    return solve(assemble(m, area_density(m)), k)


def _check_eps(eps: Sequence[float]) -> list[float]:
    values = [float(e) for e in eps]
    if not values:
        raise ValidationError("sweep needs at least one eps")
    if any(not np.isfinite(e) or e <= 0 for e in values):
        raise ValidationError("eps values must be positive", {"eps": values})
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValidationError("eps values must be strictly decreasing", {"eps": values})
    return values


def linear_fit(x: Sequence[float], y: Sequence[float]) -> Optional[dict]:
    """Least-squares line with a 95% interval on the slope (the interval needs 3 points)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) < 2 or np.ptp(x) == 0:
        return None
    fit = stats.linregress(x, y)
    out = {
        "slope": float(fit.slope),
        "intercept": float(fit.intercept),
        "points": int(len(x)),
        "slope_ci95": None,
    }
    if len(x) >= 3:
        half = float(stats.t.ppf(0.975, len(x) - 2) * fit.stderr)
        out["slope_ci95"] = [out["slope"] - half, out["slope"] + half]
    return out


def _safe_log(value: float) -> float:
    value = abs(float(value))
    return float(np.log(value)) if value > 0 else float("nan")


def _spectrum_rows(prefix: str, s: SpectrumResult, k: int) -> dict:
    return {f"{prefix}_{i}": float(s.eigenvalues[i]) for i in range(1, k + 1)}


# --------------------------------------------------------------------------- handles


def _handle_point(
    base: TriSurface,
    base_values: np.ndarray,
    p: int,
    q: int,
    length: float,
    k: int,
    n_theta: int,
    point: dict,
) -> dict:
    eps = float(point["eps"])
    glued, report = attach_handle(base, p, q, eps, length, n_theta)
    s = solve(assemble(glued, area_density(glued)), k)
    holed, _ = excise_disks(base, [p, q], eps, n_theta)
    mu = neumann_spectrum(holed, k)

    row: dict = {"ln_eps": float(np.log(eps))}
    row.update(_spectrum_rows("lambda", s, k))
    row.update(_spectrum_rows("mu", mu, k))
    for i in range(1, k + 1):
        row[f"deficit_{i}"] = float(base_values[i] - s.eigenvalues[i])
    row["ln_deficit_1"] = _safe_log(row["deficit_1"])
    row["upper_dev"] = float(s.eigenvalues[k] - base_values[k])
    # phi_1 has unit L2 norm in the area measure
    row["sup_ratio"] = float(np.abs(s.eigenvectors[:, 1]).max())
    row["genus"] = glued.genus
    row["neck_rings"] = report.n_rows
    row["n_vertices"] = glued.n_vertices
    row["max_residual"] = float(max(s.residuals.max(), mu.residuals.max()))
    return row


def _neumann_constant(eps: np.ndarray, lam1: float, mu1: np.ndarray) -> dict:
    """
    Fit C in mu_1 >= lambda_1 - C eps^2 on the coarser half of the sweep and
    check the inequality at every point.
    """
    drop = np.maximum(lam1 - mu1, 0.0) / eps**2
    n_fit = max(1, (len(eps) + 1) // 2)
    c = float(drop[:n_fit].max())
    margins = mu1 - (lam1 - c * eps**2)
    slack = 1e-10 * max(1.0, abs(lam1))
    return {
        "C": c,
        "fitted_on": n_fit,
        "margins": margins.tolist(),
        "holds": bool((margins >= -slack).all()),
    }


def handle_deficit_sweep(
    base: TriSurface,
    p: int,
    q: int,
    eps: Sequence[float],
    length: float,
    k: int = 4,
    n_theta: int = 16,
    jobs: Optional[int] = 1,
) -> SweepRecord:
    """
    Attach a handle of width eps and length length*eps for each eps and compare
    the glued spectrum with the base spectrum and with the Neumann spectrum of
    the base with both disks removed.
    """
    eps_values = _check_eps(eps)
    if not base.is_closed:
        raise ValidationError("handle sweeps need a closed base surface")
    base_spectrum = solve(assemble(base, area_density(base)), k)
    base_values = base_spectrum.eigenvalues
    logger.info(
        f"Handle sweep on {base.name or 'surface'}: {len(eps_values)} points, "
        f"l={length:g}, lambda_1={base_values[1]:.6g}"
    )

    runner = partial(_handle_point, base, base_values, p, q, length, k, n_theta)
    rows = sweep([{"eps": e} for e in eps_values], runner, jobs=jobs)
    record = SweepRecord(
        name="handle",
        parameters={
            "surface": base.name,
            "n_vertices": base.n_vertices,
            "p": int(p),
            "q": int(q),
            "l": float(length),
            "k": int(k),
            "n_theta": int(n_theta),
            "eps": eps_values,
            "base_lambda": base_values[1:].tolist(),
            "base_genus": base.genus,
        },
        rows=rows,
    )

    done = [r for r in rows if not r["error"]]
    if not done:
        record.notes.append("every sweep point failed")
        return record
    e = record.column("eps")
    inv_log = 1.0 / np.log(1.0 / e)
    record.fits["lower_deficit_vs_eps"] = linear_fit(record.column("ln_eps"), record.column("ln_deficit_1"))
    record.fits["upper_dev_vs_inv_log"] = linear_fit(inv_log, record.column("upper_dev"))
    record.fits["neumann"] = _neumann_constant(e, float(base_values[1]), record.column("mu_1"))
    sup_fit = linear_fit(np.log(np.log(1.0 / e)), np.log(record.column("sup_ratio")))
    if sup_fit is not None:
        lo, hi = SUP_GROWTH_WINDOW
        sup_fit["within_window"] = bool(lo <= sup_fit["slope"] <= hi)
    record.fits["sup_norm_growth"] = sup_fit
    record.notes.append(
        "sup-norm growth is fitted on ln ln(1/eps), which varies little over a desk-scale sweep"
    )

    deficits = np.abs(record.column("deficit_1"))
    record.fits["deficit_decreasing"] = bool((np.diff(deficits) < 0).all())
    if (record.column("neck_rings") < MIN_NECK_RINGS).any():
        record.notes.append(
            f"some necks have fewer than {MIN_NECK_RINGS} rings; raise n_theta or l"
        )
    bad_genus = [r["point"] for r in done if r["genus"] != base.genus + 1]
    if bad_genus:
        record.notes.append(f"genus did not increase by one at points {bad_genus}")
    logger.info(f"Handle sweep done: {len(done)}/{len(rows)} points")
    return record


# --------------------------------------------------------------------------- strips


def _strip_point(
    base: TriSurface,
    base_values: np.ndarray,
    p: int,
    q: int,
    length: float,
    k: int,
    orientation: str,
    point: dict,
) -> dict:
    eps = float(point["eps"])
    glued, report = attach_strip(base, p, q, eps, length, orientation)
    s = solve(assemble(glued, boundary_density(glued), kind=ProblemKind.STEKLOV), k)

    row: dict = {"ln_eps": float(np.log(eps))}
    row["rate"] = float(eps * np.sqrt(np.log(1.0 / eps)))
    row.update(_spectrum_rows("sigma", s, k))
    for i in range(1, k + 1):
        row[f"deficit_{i}"] = float(base_values[i] - s.eigenvalues[i])
    row["ln_deficit_1"] = _safe_log(row["deficit_1"])
    predicted = report.boundary_length_before - 4.0 * eps + 2.0 * length * eps
    row["boundary_before"] = report.boundary_length_before
    row["boundary_after"] = report.boundary_length_after
    row["boundary_predicted"] = float(predicted)
    row["boundary_error"] = float(report.boundary_length_after - predicted)
    row["boundary_components"] = report.boundary_components_after
    row["n_vertices"] = glued.n_vertices
    row["max_residual"] = float(s.residuals.max())
    return row


def strip_deficit_sweep(
    base: TriSurface,
    p: int,
    q: int,
    eps: Sequence[float],
    length: float,
    k: int = 3,
    orientation: str = "preserve",
    jobs: Optional[int] = 1,
) -> SweepRecord:
    """Steklov counterpart of the handle sweep: attach a strip of width 2*eps between boundary points."""
    eps_values = _check_eps(eps)
    if base.is_closed:
        raise ValidationError("strip sweeps need a base surface with boundary")
    base_spectrum = solve(assemble(base, boundary_density(base), kind=ProblemKind.STEKLOV), k)
    base_values = base_spectrum.eigenvalues
    logger.info(
        f"Strip sweep on {base.name or 'surface'}: {len(eps_values)} points, "
        f"l={length:g}, sigma_1={base_values[1]:.6g}"
    )

    runner = partial(_strip_point, base, base_values, p, q, length, k, orientation)
    rows = sweep([{"eps": e} for e in eps_values], runner, jobs=jobs)
    record = SweepRecord(
        name="strip",
        parameters={
            "surface": base.name,
            "n_vertices": base.n_vertices,
            "p": int(p),
            "q": int(q),
            "l": float(length),
            "k": int(k),
            "orientation": orientation,
            "eps": eps_values,
            "base_sigma": base_values[1:].tolist(),
            "base_boundary_length": base.boundary_length,
        },
        rows=rows,
    )
    if all(r["error"] for r in rows):
        record.notes.append("every sweep point failed")
        return record
    record.fits["deficit_vs_rate"] = linear_fit(
        np.log(record.column("rate")), record.column("ln_deficit_1")
    )
    deficits = np.abs(record.column("deficit_1"))
    record.fits["deficit_decreasing"] = bool((np.diff(deficits) < 0).all())
    record.fits["max_boundary_error"] = float(np.abs(record.column("boundary_error")).max())
    return record


# --------------------------------------------------------------------------- capacity


def log_cutoff(r: np.ndarray, eps: float) -> np.ndarray:
    """0 inside eps, 1 outside sqrt(eps), logarithmic in between."""
    outer = np.sqrt(eps)
    eta = np.log(np.maximum(r, eps) / eps) / np.log(outer / eps)
    return np.clip(eta, 0.0, 1.0)


def cutoff_capacity(m: TriSurface, center: int, eps: float) -> CapacityReport:
    """Dirichlet energy of the logarithmic cutoff around ``center`` in graph distance."""
    if not 0 < eps < 1:
        raise ValidationError("cutoff needs 0 < eps < 1", {"eps": eps})
    if not 0 <= center < m.n_vertices:
        raise ValidationError(f"vertex {center} is not on the surface")
    outer = float(np.sqrt(eps))
    r = graph_distances(m, [center])[0]
    in_annulus = (r > eps) & (r < outer)
    # distinct radii up to rounding
    rings = int(np.unique(np.round(np.log(r[in_annulus]), 9)).size)
    if rings < MIN_ANNULUS_RINGS:
        raise ValidationError(
            f"annulus under-resolved: {rings} rings between eps and sqrt(eps), "
            f"need {MIN_ANNULUS_RINGS}",
            {"rings": rings, "eps": eps},
        )
    if np.isinf(r).any() or r.max() <= outer:
        raise ValidationError("surface does not extend past sqrt(eps) from the center")

    eta = log_cutoff(r, eps)
    areas, grads = dirichlet_geometry(m)
    grad_eta = np.einsum("fc,fca->fa", eta[m.faces], grads)
    face_energy = areas * np.einsum("fa,fa->f", grad_eta, grad_eta)
    far = (eta[m.faces] == 1.0).all(axis=1)
    energy = float(eta @ (stiffness_matrix(m) @ eta))
    report = CapacityReport(
        center=int(center),
        eps=float(eps),
        energy=energy,
        analytic=float(4.0 * np.pi / np.log(1.0 / eps)),
        rings_in_annulus=rings,
        far_field_energy=float(face_energy[far].sum()),
        inner_radius=float(eps),
        outer_radius=outer,
    )
    logger.debug(
        f"Cutoff at eps={eps:g}: energy {energy:.6g} vs {report.analytic:.6g} "
        f"({rings} rings)"
    )
    return report


# --------------------------------------------------------------------------- extension lemma


def _ring_energy(m: TriSurface, ring: np.ndarray, values: np.ndarray) -> float:
    k = stiffness_matrix(m)
    psi = harmonic_extension(k, ring, values)
    return float(psi @ (k @ psi))


def _extension_ratios(k: int, length: float, n: int) -> tuple[float, float, float]:
    theta = 2.0 * np.pi * np.arange(n) / n
    data = np.cos(k * theta)
    # only the glued ring is constrained; the far end stays free
    tube = cylinder(0.5 * length, n_theta=n)
    tube_energy = _ring_energy(tube, np.arange(n), data)
    disk = polar_disk(EXTENSION_DISK_RMIN, n_theta=n)
    outer = np.arange(disk.n_vertices - n, disk.n_vertices)
    disk_energy = _ring_energy(disk, outer, data)
    return tube_energy / disk_energy, tube_energy, disk_energy


def harmonic_extension_ratio(k: int, length: float, n: Optional[int] = None) -> ExtensionReport:
    """
    Energy of the mode-k harmonic function on the cylinder of height l/2 with a
    free far end, divided by the energy of its harmonic extension to the disk.

    Ratios at n and 2n angular points are Richardson-extrapolated.
    """
    if k < 1:
        raise ValidationError("mode k must be >= 1", {"k": k})
    if not np.isfinite(length) or length <= 0:
        raise ValidationError("length must be positive", {"l": length})
    n = max(128, 16 * k) if n is None else int(n)
    if n < 8 * k:
        raise ValidationError(
            f"resolution n={n} is too coarse for mode {k}: need at least {8 * k} points",
            {"n": n, "k": k},
        )
    coarse, _, _ = _extension_ratios(k, length, n)
    fine, tube_energy, disk_energy = _extension_ratios(k, length, 2 * n)
    ratio = (4.0 * fine - coarse) / 3.0
    report = ExtensionReport(
        k=int(k),
        length=float(length),
        n=n,
        ratio=float(ratio),
        raw_ratios=(float(coarse), float(fine)),
        analytic=float(np.tanh(0.5 * k * length)),
        lower_bound=float(1.0 - 4.0 * np.exp(-length)),
        cylinder_energy=tube_energy,
        disk_energy=disk_energy,
        notes=[],
    )
    if report.ratio < report.lower_bound:
        report.notes.append("ratio falls below 1 - 4 exp(-l)")
        logger.warning(f"extension ratio {ratio:.6g} below bound for k={k}, l={length:g}")
    return report
