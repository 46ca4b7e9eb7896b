"""Eigenvalue functionals F(lambda_bar_1, ..., lambda_bar_m) and their reports."""

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from src.models.measure import MetricPerturbation
from src.models.spectrum import Cluster
from src.utils.errors import FunctionalError


class FunctionalFamily(str, Enum):
    """Scalar profiles f with F = sum_i a_i f(x_i)."""

    INVERSE_POWER = "inverse_power"
    HEAT = "heat"
    NEG_LOG = "neg_log"


_FAMILY_CODES = {
    "inv": FunctionalFamily.INVERSE_POWER,
    "exp": FunctionalFamily.HEAT,
    "log": FunctionalFamily.NEG_LOG,
}
_DEFAULT_PARAMETER = {
    FunctionalFamily.INVERSE_POWER: 1.0,
    FunctionalFamily.HEAT: 1.0,
    FunctionalFamily.NEG_LOG: 0.0,
}
_SHORT = re.compile(r"^(?P<code>inv|exp|log)(?P<m>\d+)(?:@(?P<param>[^@]+))?$")
_LONG = re.compile(r"^(?P<code>inv|exp|log):(?P<weights>[^@]+)(?:@(?P<param>[^@]+))?$")


@dataclass(frozen=True)
class FunctionalSpec:
    """
    F = sum_i a_i f(x_i) over the first m normalized eigenvalues.

    Coordinates with a_i > 0 are strictly decreasing, a_i = 0 are ignored.
    """

    weights: tuple[float, ...]
    family: FunctionalFamily = FunctionalFamily.INVERSE_POWER
    parameter: float = 1.0
    name: str = ""

    def __post_init__(self):
        weights = tuple(float(a) for a in self.weights)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "family", FunctionalFamily(self.family))
        if not weights:
            raise FunctionalError("functional needs at least one weight")
        if not all(math.isfinite(a) for a in weights):
            raise FunctionalError("functional weights must be finite")
        if self.family is not FunctionalFamily.NEG_LOG and not self.parameter > 0:
            raise FunctionalError(
                f"{self.family.value} functional needs a positive parameter",
                {"parameter": self.parameter},
            )
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        code = next(c for c, f in _FAMILY_CODES.items() if f is self.family)
        weights = ",".join(f"{a:g}" for a in self.weights)
        suffix = "" if self.family is FunctionalFamily.NEG_LOG else f"@{self.parameter:g}"
        return f"{code}:{weights}{suffix}"

    @classmethod
    def parse(cls, text: str) -> "FunctionalSpec":
        """
        ``inv1`` is 1/lambda_bar_1, ``inv3`` sums three inverses, ``exp1`` is
        exp(-lambda_bar_1), ``log2`` is -ln lambda_bar_1 - ln lambda_bar_2 and
        ``inv:1,2@1.0`` gives explicit weights and parameter.
        """
        raw = text.strip().lower()
        short = _SHORT.match(raw)
        long = _LONG.match(raw)
        try:
            if short:
                family = _FAMILY_CODES[short.group("code")]
                m = int(short.group("m"))
                if m < 1:
                    raise FunctionalError("functional must use at least one eigenvalue")
                weights = (1.0,) * m
                param = short.group("param")
            elif long:
                family = _FAMILY_CODES[long.group("code")]
                weights = tuple(float(a) for a in long.group("weights").split(","))
                param = long.group("param")
            else:
                raise FunctionalError(f"cannot parse functional '{text}'")
            parameter = float(param) if param is not None else _DEFAULT_PARAMETER[family]
        except ValueError as exc:
            raise FunctionalError(f"cannot parse functional '{text}': {exc}") from exc
        return cls(weights=weights, family=family, parameter=parameter, name=raw)

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def mask(self) -> np.ndarray:
        """True where the coordinate is strictly decreasing."""
        return np.asarray(self.weights) > 0

    @property
    def infinite_at_zero(self) -> bool:
        return self.family is not FunctionalFamily.HEAT

    def profile(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.family is FunctionalFamily.INVERSE_POWER:
                out = np.where(x > 0, np.power(np.where(x > 0, x, 1.0), -self.parameter), np.inf)
            elif self.family is FunctionalFamily.HEAT:
                out = np.exp(-self.parameter * x)
            else:
                out = np.where(x > 0, -np.log(np.where(x > 0, x, 1.0)), np.inf)
        return out

    def profile_derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        s = self.parameter
        if self.family is FunctionalFamily.INVERSE_POWER:
            return -s * np.power(x, -s - 1.0)
        if self.family is FunctionalFamily.HEAT:
            return -s * np.exp(-s * x)
        return -1.0 / x

    def value(self, x: np.ndarray) -> float:
        """F at normalized eigenvalues; +inf on the boundary where f blows up."""
        x = np.asarray(x, dtype=np.float64)[: self.m]
        terms = self.profile(x)
        a = np.asarray(self.weights)
        active = a != 0
        if np.isinf(terms[active]).any():
            return math.inf
        return float(np.dot(a[active], terms[active]))

    def partials(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)[: self.m]
        a = np.asarray(self.weights)
        out = np.zeros(self.m)
        active = a != 0
        out[active] = a[active] * self.profile_derivative(x[active])
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.family.value,
            "weights": list(self.weights),
            "parameter": self.parameter,
            "m": self.m,
        }


@dataclass
class HypothesisReport:
    """Sampled check that each coordinate is strictly decreasing or ignored."""

    passed: bool
    samples: int
    decreasing: list[bool]
    ignored: list[bool]
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "samples": self.samples,
            "decreasing": self.decreasing,
            "ignored": self.ignored,
            "failures": self.failures,
        }


@dataclass
class EnergyReport:
    """E = F(lambda_bar_1..m) and E0 = F(0, lambda_bar_2..m)."""

    energy: float
    energy_zero: float
    gap_holds: bool
    normalized: np.ndarray

    def to_dict(self) -> dict:
        return {
            "E": self.energy,
            "E0": self.energy_zero,
            "gap_holds": self.gap_holds,
            "normalized": self.normalized,
        }


@dataclass
class DerivativeReport:
    """
    Right derivatives of the normalized eigenvalues of one cluster along (h, b).

    ``derivatives`` are the sorted eigenvalues of ``form``; entry j is the
    derivative of the (cluster.start + j)-th normalized eigenvalue.
    """

    k: int
    cluster: Cluster
    form: np.ndarray
    derivatives: np.ndarray
    value: float
    sidedness: str = "right"

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "cluster": self.cluster.to_dict(),
            "form": self.form,
            "derivatives": self.derivatives,
            "value": self.value,
            "sidedness": self.sidedness,
        }


@dataclass
class FiniteDifferenceReport:
    """Difference quotients of normalized eigenvalues along (g + t h, beta + t b)."""

    k: int
    t: float
    central: float
    richardson: float
    one_sided: np.ndarray
    cluster: Cluster

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "t": self.t,
            "central": self.central,
            "richardson": self.richardson,
            "one_sided": self.one_sided,
            "cluster": self.cluster.to_dict(),
        }


@dataclass
class ClusterWeights:
    """t_i = -c dF_i with c chosen so that sum_i t_i lambda_bar_i = 1."""

    t: np.ndarray
    c: float
    cluster_mass: dict[int, float]
    partials: np.ndarray

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "c": self.c,
            "cluster_mass": {str(k): v for k, v in self.cluster_mass.items()},
            "partials": self.partials,
        }


@dataclass
class SubgradientElement:
    """One (stress, density) pair; selection names the eigenbasis choice that produced it."""

    stress: MetricPerturbation
    density: np.ndarray
    selection: str
    d: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rotations: Optional[dict[int, np.ndarray]] = None
