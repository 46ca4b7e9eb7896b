"""Parallel parameter sweeps with per-point error capture."""

import logging
import time
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

from joblib import Parallel, delayed

from src.models.run import RunFile, rows_to_csv
from src.services.optimizer import run_from_file
from src.utils.config import get_settings
from src.utils.logging import LogContext

logger = logging.getLogger(__name__)

PointRunner = Callable[[dict], dict]


def _run_point(index: int, point: dict, runner: PointRunner, record_runtime: bool) -> dict:
    row: dict[str, Any] = {"point": index, **point}
    started = time.perf_counter()
    with LogContext(logger, sweep_point=index):
        try:
            row.update(runner(point))
            row["error"] = ""
        except Exception as exc:  # one failed point must not end the sweep
            logger.error(f"sweep point {index} {point} failed: {exc}")
            row["error"] = f"{type(exc).__name__}: {exc}"
    if record_runtime:
        row["runtime_s"] = time.perf_counter() - started
    return row


def sweep(
    points: Sequence[dict],
    runner: PointRunner,
    jobs: Optional[int] = None,
    record_runtime: bool = False,
) -> list[dict]:
    """
    Run ``runner`` on every point, in parallel when jobs > 1.

    Rows come back in input order. Runtimes are left out unless asked for so
    that repeated sweeps give identical tables.
    """
    jobs = get_settings().default_jobs if jobs is None else jobs
    logger.info(f"Sweeping {len(points)} points with {jobs} job(s)")
    if jobs == 1:
        rows = [_run_point(i, dict(p), runner, record_runtime) for i, p in enumerate(points)]
    else:
        rows = Parallel(n_jobs=jobs)(
            delayed(_run_point)(i, dict(p), runner, record_runtime) for i, p in enumerate(points)
        )
    failed = sum(1 for r in rows if r["error"])
    if failed:
        logger.warning(f"{failed} of {len(rows)} sweep points failed")
    return list(rows)


def write_table(rows: list[dict], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows), encoding="utf-8")
    return path


def optimize_point(run: RunFile, point: dict) -> dict:
    """Runner for seed sweeps over an optimize run file."""
    _, result = run_from_file(run, seed=int(point["seed"]))
    values = result.final_spectrum.normalized()[1 : result.functional.m + 1]
    row = {
        "objective": result.objective,
        "termination": result.termination.value,
        "iterations": len(result.history) - 1,
        "concentration": result.concentration,
    }
    for i, v in enumerate(values, start=1):
        row[f"lambda_bar_{i}"] = float(v)
    for name, value in result.defects.items():
        row[f"defect_{name}"] = value
    return row
