# Data Models Package
"""Surfaces, measures, spectra, functionals, certificates and run records."""

from src.models.certificate import (
    CapacityReport,
    ConformalityReport,
    EigenmapCertificate,
    ExtensionReport,
    ProbeResult,
)
from src.models.functional import ClusterWeights, FunctionalFamily, FunctionalSpec
from src.models.measure import ConformalFactor, DensityMeasure, MeasureSupport, MetricPerturbation
from src.models.run import (
    IterateRecord,
    MoveSet,
    OptimizerConfig,
    OptimRun,
    RunFile,
    RunManifest,
    SweepRecord,
    TerminationReason,
)
from src.models.spectrum import (
    AssembledProblem,
    Cluster,
    MassKind,
    ProblemKind,
    SpectrumResult,
)
from src.models.surface import SurgeryKind, SurgeryReport, TriSurface

__all__ = [
    # Geometry
    "TriSurface",
    "SurgeryKind",
    "SurgeryReport",
    "DensityMeasure",
    "MeasureSupport",
    "ConformalFactor",
    "MetricPerturbation",
    # Spectra
    "AssembledProblem",
    "Cluster",
    "MassKind",
    "ProblemKind",
    "SpectrumResult",
    # Functionals
    "FunctionalFamily",
    "FunctionalSpec",
    "ClusterWeights",
    # Certificates
    "EigenmapCertificate",
    "ConformalityReport",
    "ProbeResult",
    "CapacityReport",
    "ExtensionReport",
    # Runs
    "MoveSet",
    "OptimizerConfig",
    "RunFile",
    "IterateRecord",
    "OptimRun",
    "TerminationReason",
    "SweepRecord",
    "RunManifest",
]
