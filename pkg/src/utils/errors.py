"""Exception hierarchy with command-line exit codes."""

from typing import Any, Optional


class SurfaceLabError(Exception):
    """Base error for the library."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class ValidationError(SurfaceLabError):
    """Invalid input: meshes, densities, configs, arguments."""

    exit_code = 2


class MeshError(ValidationError):
    """Mesh fails to parse or violates a manifold invariant."""


class SurgeryError(ValidationError):
    """Surgery parameters are incompatible with the surface."""


class ConfigError(ValidationError):
    """Run configuration is malformed."""


class FunctionalError(ValidationError):
    """Eigenvalue functional is malformed or violates the monotonicity hypothesis."""


class NumericalError(SurfaceLabError):
    """A numerical procedure failed."""

    exit_code = 3


class SolverError(NumericalError):
    """Eigensolver did not converge or produced inconsistent results."""


class ClusterAmbiguityError(NumericalError):
    """An eigenvalue cluster boundary cannot be resolved at the current tolerance."""

    def __init__(self, message: str, candidate: tuple[int, int]):
        super().__init__(message, details={"candidate_cluster": list(candidate)})
        self.candidate = candidate
