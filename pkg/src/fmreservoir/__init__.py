"""Numerical model of a frequency-multiplexed photonic reservoir computer."""

__version__ = "0.1.0"

from .errors import DomainError, NumericalInstabilityError, UsageError
from .readout import ReadoutModel, nmse, predict, train_ridge, wta_classify
from .sidebands import (
    CouplingMatrix,
    ReservoirConfig,
    bessel_j,
    build_coupling_matrix,
    encode_input,
    run_sequence,
    step,
)

__all__ = [
    "CouplingMatrix",
    "DomainError",
    "NumericalInstabilityError",
    "ReadoutModel",
    "ReservoirConfig",
    "UsageError",
    "bessel_j",
    "build_coupling_matrix",
    "encode_input",
    "nmse",
    "predict",
    "run_sequence",
    "step",
    "train_ridge",
    "wta_classify",
]
