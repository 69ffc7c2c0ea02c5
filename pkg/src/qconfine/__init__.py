"""qconfine - bound qubit subspace leakage from Rabi oscillation spectra."""

__version__ = "0.1.0"

from .core import (
    HermitianOperator,
    NonHermitianInput,
    QConfineError,
    RadicandNegative,
    analytic_bounds,
    analytic_peaks,
    exact_leakage,
)
from .estimate import LeakageEstimate, analyse_trace, estimate
from .simulate import RabiTrace, SamplingPlan, family, sample_trace
from .spectral import Spectrum, dft, phase_match

from .cli import qconfine  # noqa: E402  isort: skip

__all__ = [
    "HermitianOperator",
    "LeakageEstimate",
    "NonHermitianInput",
    "QConfineError",
    "RabiTrace",
    "RadicandNegative",
    "SamplingPlan",
    "Spectrum",
    "analyse_trace",
    "analytic_bounds",
    "analytic_peaks",
    "dft",
    "estimate",
    "exact_leakage",
    "family",
    "phase_match",
    "qconfine",
    "sample_trace",
]
