"""Online robust covariance and sparse precision estimation.

A stream of zero-mean Gaussian observations, a fraction of which may be
arbitrarily corrupted, is turned into a covariance estimate by an online
trimmed inner product (:mod:`robust_ggm.trim`) and into a sparse precision
estimate by an online dual alternating minimization (:mod:`robust_ggm.gama`).
"""

from .errors import (
    DataError,
    NumericalError,
    ParameterError,
    PenaltyError,
    StateError,
    TheoryWarning,
)
from .gama import GamaConfig, GamaState, init_dual, step
from .synth import CorruptionModel, CorruptionSpec, GroundTruth, corrupt, generate_graph, sample_stream
from .trim import Phase, TrimConfig, TrimState, compute_epsilon

__version__ = "0.1.0"

__all__ = [
    "CorruptionModel",
    "CorruptionSpec",
    "DataError",
    "GamaConfig",
    "GamaState",
    "GroundTruth",
    "NumericalError",
    "ParameterError",
    "PenaltyError",
    "Phase",
    "StateError",
    "TheoryWarning",
    "TrimConfig",
    "TrimState",
    "compute_epsilon",
    "corrupt",
    "generate_graph",
    "init_dual",
    "sample_stream",
    "step",
]
