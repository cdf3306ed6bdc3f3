from .eigenpair import EigenPair, Regime
from .ensemble import ComparisonReport, DonorMode, EnsembleConfig, TransportSelection
from .greens import PoleExpansion, SiteIndex, SiteKind
from .numerics import EsmExpansion, PptProblem
from .rates import Provenance, ProvenanceKind, RateKind, RateResult
from .run_config import OutputFormat, OutputSpec, ResultTable, RunConfig, RunMode, SweepAxis, SweepSpec
from .spectrum import Spectrum
from .system import DisorderSample, ProbeParams, ReservoirParams, SystemParams

__all__ = [
    "ComparisonReport",
    "DisorderSample",
    "DonorMode",
    "EigenPair",
    "EnsembleConfig",
    "EsmExpansion",
    "OutputFormat",
    "OutputSpec",
    "PoleExpansion",
    "PptProblem",
    "ProbeParams",
    "Provenance",
    "ProvenanceKind",
    "RateKind",
    "RateResult",
    "Regime",
    "ReservoirParams",
    "ResultTable",
    "RunConfig",
    "RunMode",
    "SiteIndex",
    "SiteKind",
    "Spectrum",
    "SweepAxis",
    "SweepSpec",
    "SystemParams",
]
