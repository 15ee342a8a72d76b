"""Numerical demultiplexing of colour-filter-array sensor readings into reflectance spectra."""

from .core import (
    DEFAULT_GRID,
    Illuminant,
    Measurement,
    SensitivityMatrix,
    Spectrum,
    WavelengthGrid,
    forward_measure,
    forward_measure_batch,
    psnr,
    validate_sensitivity,
)
from .errors import (
    ConditioningError,
    DataFormatError,
    DimensionError,
    DivisionHazardError,
    ExperimentError,
    SpecDemuxError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRID",
    "ConditioningError",
    "DataFormatError",
    "DimensionError",
    "DivisionHazardError",
    "ExperimentError",
    "Illuminant",
    "Measurement",
    "SensitivityMatrix",
    "SpecDemuxError",
    "Spectrum",
    "UsageError",
    "WavelengthGrid",
    "forward_measure",
    "forward_measure_batch",
    "psnr",
    "validate_sensitivity",
]
