"""Optimizer configuration, run histories, sweep records and run manifests."""

import csv
import io
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from src.models.functional import FunctionalSpec
from src.models.measure import ConformalFactor, DensityMeasure
from src.models.spectrum import SpectrumResult
from src.utils.errors import ConfigError, FunctionalError
from src.utils.serialization import to_jsonable


class MoveSet(str, Enum):
    """Which variables an optimizer step moves."""

    DENSITY = "density"
    CONFORMAL = "conformal"
    BOTH = "both"


class OptimizerConfig(BaseModel):
    """Step rule, tolerances and objective for a density/conformal descent run."""

    model_config = ConfigDict(extra="forbid")

    objective: str = Field(default="inv1", description="Functional grammar, e.g. inv1, log2")
    moves: MoveSet = MoveSet.DENSITY
    initial_step: float = Field(default=0.2, gt=0)
    backtrack: float = Field(default=0.5, gt=0, lt=1)
    growth: float = Field(default=1.5, ge=1)
    min_step: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=200, ge=0)
    objective_tol: float = Field(default=0.0, ge=0, description="0 disables the plateau test")
    defect_tol: float = Field(default=1e-6, gt=0)
    samples_per_cluster: int = Field(default=8, ge=0)
    k_extra: int = Field(default=4, ge=1)

    @field_validator("objective")
    @classmethod
    def parse_objective(cls, v: str) -> str:
        try:
            FunctionalSpec.parse(v)
        except FunctionalError as exc:
            raise ValueError(exc.message) from exc
        return v

    @property
    def functional(self) -> FunctionalSpec:
        return FunctionalSpec.parse(self.objective)


class RunSection(BaseModel):
    """Inputs of an optimize run: surface, starting density and randomness."""

    model_config = ConfigDict(extra="forbid")

    mesh: str = Field(..., description="Mesh path or builtin spec such as sphere:3")
    density: str = Field(default="uniform", description="uniform, area or a density JSON path")
    init: Literal["as_is", "perturbed"] = "as_is"
    perturbation: float = Field(default=0.0, ge=0)
    seed: int = 0


class RunFile(BaseModel):
    """Top level of an optimize TOML file."""

    model_config = ConfigDict(extra="forbid")

    run: RunSection
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> "RunFile":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
        return cls.from_mapping(data, source=str(path))

    @classmethod
    def from_mapping(cls, data: dict, source: str = "<config>") -> "RunFile":
        try:
            return cls.model_validate(data)
        except PydanticValidationError as exc:
            raise config_error(exc, source) from exc


def config_error(exc: PydanticValidationError, source: str) -> ConfigError:
    """Translate the first pydantic error into a ConfigError naming the key."""
    first = exc.errors()[0]
    key = ".".join(str(part) for part in first["loc"])
    if first["type"] == "extra_forbidden":
        message = f"{source}: unknown key '{key}'"
    else:
        message = f"{source}: invalid value for '{key}': {first['msg']}"
    return ConfigError(message, {"key": key, "errors": len(exc.errors())})


class TerminationReason(str, Enum):
    """Why an optimizer run stopped."""

    CONVERGED = "converged"
    OBJECTIVE_PLATEAU = "objective_plateau"
    STALLED = "stalled"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class IterateRecord:
    """One optimizer iterate or rejected trial step."""

    iteration: int
    objective: float
    normalized: list[float]
    step: float
    step_norm: float
    accepted: bool
    defect: float
    clusters: list[int]
    gap_holds: bool
    move: str = ""

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "objective": self.objective,
            "normalized": self.normalized,
            "step": self.step,
            "step_norm": self.step_norm,
            "accepted": self.accepted,
            "defect": self.defect,
            "clusters": self.clusters,
            "gap_holds": self.gap_holds,
            "move": self.move,
        }


@dataclass
class OptimRun:
    """Outcome of minimize_E: best iterate, history and diagnostics."""

    config: OptimizerConfig
    functional: FunctionalSpec
    history: list[IterateRecord]
    final_density: DensityMeasure
    final_spectrum: SpectrumResult
    objective: float
    termination: TerminationReason
    final_conformal: Optional[ConformalFactor] = None
    defects: dict[str, float] = field(default_factory=dict)
    concentration: float = 1.0
    warnings: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> list[IterateRecord]:
        return [r for r in self.history if r.accepted]

    def to_dict(self) -> dict:
        return {
            "config": self.config.model_dump(mode="json"),
            "functional": self.functional.to_dict(),
            "objective": self.objective,
            "normalized": self.final_spectrum.normalized()[1 : self.functional.m + 1],
            "termination": self.termination.value,
            "iterations": len(self.history),
            "accepted_steps": len(self.accepted) - 1 if self.accepted else 0,
            "defects": self.defects,
            "concentration": self.concentration,
            "warnings": self.warnings,
            "spectrum": self.final_spectrum.to_dict(),
        }


def _csv_cell(value: Any) -> str:
    value = to_jsonable(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return " ".join(_csv_cell(v) for v in value)
    return str(value)


def table_columns(rows: list[dict]) -> list[str]:
    """Sorted union of row keys with ``point`` first and ``error`` last."""
    keys = set()
    for row in rows:
        keys.update(row)
    middle = sorted(keys - {"point", "error"})
    return ["point"] + middle + ["error"]


def rows_to_csv(rows: list[dict]) -> str:
    columns = table_columns(rows)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


@dataclass
class SweepRecord:
    """Rows of a parameter sweep plus fitted rates."""

    name: str
    parameters: dict[str, Any]
    rows: list[dict]
    fits: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.rows if r.get("error")]

    def column(self, key: str) -> np.ndarray:
        """Values of one column over the rows that completed."""
        return np.array([r[key] for r in self.rows if not r.get("error")], dtype=np.float64)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "rows": self.rows,
            "fits": self.fits,
            "notes": self.notes,
        }


@dataclass
class RunManifest:
    """Provenance of one CLI run directory."""

    command: str
    argv: list[str]
    config_path: Optional[str]
    inputs: dict[str, str]
    inputs_digest: str
    seed: int
    tool_version: str
    started_at: str
    finished_at: str = ""
    outputs: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "argv": self.argv,
            "config_path": self.config_path,
            "inputs": self.inputs,
            "inputs_digest": self.inputs_digest,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": self.outputs,
        }
