"""Energy-measure diagnostics: scaling exponents, field diagnostics, measure dimensions,
covering sums and synthetic data."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .exponents import (
    DomainError,
    PQPoint,
    classify_region,
    euler_threshold,
    morrey_exponent,
    nse_threshold,
    optimal_alpha,
    scaling_exponents,
)
from .fieldio import BumpSpec, CutoffProfile, FieldFormatError, SampledField, SampledMeasure

__all__ = [
    "BumpSpec",
    "CutoffProfile",
    "DomainError",
    "FieldFormatError",
    "PQPoint",
    "SampledField",
    "SampledMeasure",
    "__version__",
    "classify_region",
    "euler_threshold",
    "morrey_exponent",
    "nse_threshold",
    "optimal_alpha",
    "scaling_exponents",
]
