"""Leakage bounds with propagated uncertainties from spectral peak heights."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

from .core import HermitianOperator, QConfineError, analytic_peaks
from .simulate import RabiTrace
from .spectral import (
    DEFAULT_GUARD,
    DEFAULT_MIN_PERIODS,
    Spectrum,
    dft,
    peak_stats,
    phase_match,
)

logger = logging.getLogger(__name__)

FLAG_EPS_LOW_CLAMPED = "eps_low_clamped"
FLAG_EPS_HIGH_CLAMPED = "eps_high_clamped"
FLAG_UPPER_UNDEFINED = "upper_bound_undefined"

# Peak heights this far outside [0, 1] are rejected
RANGE_TOL = 1e-12


class OutOfRangePeaks(QConfineError):
    """Raised when peak heights lie outside [0, 1]."""

    pass


@dataclass(frozen=True)
class LeakageEstimate:
    """Lower/upper leakage bounds and their 3-sigma uncertainties.

    ``eps_high`` and ``d_eps_high`` are None when 2 h0 + 4 h01 - 1 <= 0.
    The unclamped bounds are kept in the ``*_raw`` fields.
    """

    eps_low: float
    eps_high: Optional[float]
    d_eps_low: float
    d_eps_high: Optional[float]
    h0: float
    h01: float
    delta_h: float
    eps_low_raw: float
    eps_high_raw: Optional[float]
    flags: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["flags"] = list(self.flags)
        return data


def estimate(h0: float, h01: float, delta_h: float = 0.0) -> LeakageEstimate:
    """Bound the subspace leakage from the DC and primary peak heights.

    Args:
        h0: DC channel height
        h01: Primary peak height
        delta_h: Standard deviation of the spectral noise floor

    Returns:
        LeakageEstimate with eps_low = 1 - sqrt(h0 + 2 h01) and
        eps_high = (1 - sqrt(2 h0 + 4 h01 - 1)) / 2, uncertainties
        3 delta_h / (2 sqrt(h0 + 2 h01)) and 3 delta_h / (2 sqrt(2 h0 + 4 h01 - 1)).

    Raises:
        OutOfRangePeaks: If h0 or h01 is outside [0, 1]
    """
    for name, value in (("h0", h0), ("h01", h01)):
        if not (-RANGE_TOL <= value <= 1.0 + RANGE_TOL) or math.isnan(value):
            raise OutOfRangePeaks(f"{name} = {value!r} is outside [0, 1]")
    if delta_h < 0.0:
        raise ValueError(f"delta_h must be non-negative, got {delta_h}")

    flags = []
    total = h0 + 2.0 * h01
    eps_low_raw = 1.0 - math.sqrt(max(total, 0.0))
    d_eps_low = 3.0 * delta_h / (2.0 * math.sqrt(total)) if total > 0.0 else math.inf
    eps_low = min(max(eps_low_raw, 0.0), 1.0)
    if eps_low != eps_low_raw:
        flags.append(FLAG_EPS_LOW_CLAMPED)

    radicand = 2.0 * total - 1.0
    eps_high: Optional[float]
    eps_high_raw: Optional[float]
    d_eps_high: Optional[float]
    if radicand <= 0.0:
        eps_high = eps_high_raw = d_eps_high = None
        flags.append(FLAG_UPPER_UNDEFINED)
        logger.warning(
            "Upper bound undefined: 2*h0 + 4*h01 - 1 = %.3e <= 0", radicand
        )
    else:
        root = math.sqrt(radicand)
        eps_high_raw = 0.5 * (1.0 - root)
        d_eps_high = 3.0 * delta_h / (2.0 * root)
        eps_high = max(eps_high_raw, 0.0)
        if eps_high != eps_high_raw:
            flags.append(FLAG_EPS_HIGH_CLAMPED)

    if flags:
        logger.debug("Estimate flags: %s", ", ".join(flags))
    return LeakageEstimate(
        eps_low=eps_low,
        eps_high=eps_high,
        d_eps_low=d_eps_low,
        d_eps_high=d_eps_high,
        h0=h0,
        h01=h01,
        delta_h=delta_h,
        eps_low_raw=eps_low_raw,
        eps_high_raw=eps_high_raw,
        flags=tuple(flags),
    )


def estimate_spectrum(spectrum: Spectrum) -> LeakageEstimate:
    stats = peak_stats(spectrum)
    return estimate(stats.h0, stats.h01, stats.delta_h)


def analyse_trace(
    trace: RabiTrace,
    guard: int = DEFAULT_GUARD,
    min_periods: float = DEFAULT_MIN_PERIODS,
) -> Tuple[RabiTrace, Spectrum, LeakageEstimate]:
    """Phase match, transform and bound a measured trace.

    Returns:
        The truncated trace, its spectrum and the leakage estimate
    """
    matched = phase_match(trace, min_periods)
    spectrum = dft(matched, guard)
    return matched, spectrum, estimate_spectrum(spectrum)


def analytic_estimate(hamiltonian: HermitianOperator) -> LeakageEstimate:
    """Noise-free bounds computed from the exact peak heights of a Hamiltonian."""
    peaks = analytic_peaks(hamiltonian)
    return estimate(
        min(max(peaks.h0, 0.0), 1.0), min(max(peaks.primary.height, 0.0), 1.0), 0.0
    )


def significance_confinement(est: LeakageEstimate, eps_low_analytic: float) -> bool:
    """True when the analytic lower bound exceeds six uncertainties of eps_low."""
    return eps_low_analytic - 6.0 * est.d_eps_low > 0.0
