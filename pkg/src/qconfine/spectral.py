"""Discrete Fourier analysis of Rabi traces.

The DFT is one-sided and normalised by 1/K without mean subtraction or zero
padding, so a phase-matched ideal trace puts exactly h0 = sum |c_a|^4 in the DC
channel and h_ab = |c_a|^2 |c_b|^2 in the channel of each transition.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import QConfineError
from .simulate import RabiTrace

logger = logging.getLogger(__name__)

MIN_SAMPLES = 4
MIN_CHANNELS = 8
DEFAULT_GUARD = 1
DEFAULT_MIN_PERIODS = 4.0
DEFAULT_FALSE_ALARM = 1e-3
# Trial-function values above this count as a perfect match
TRIAL_SATURATION = 1e9

FLAG_PRIMARY_AT_EDGE = "primary_at_edge"


class NonUniformSampling(QConfineError):
    """Raised when trace times are not evenly spaced."""

    pass


class TooShort(QConfineError):
    """Raised when a trace has too few samples for the requested analysis."""

    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided amplitude spectrum with its primary peaks and noise floor."""

    freqs: np.ndarray
    amps: np.ndarray
    resolution: float
    num_samples: int
    primary_index: int
    guard: int
    noise_mean: float
    noise_sd: float
    flags: Tuple[str, ...] = ()

    @property
    def num_channels(self) -> int:
        return int(self.amps.shape[0])

    @property
    def primary_dc(self) -> float:
        """h0, the DC channel."""
        return float(self.amps[0])

    @property
    def primary_peak(self) -> Tuple[float, float]:
        """(omega_p, h01) of the strongest non-DC channel."""
        return float(self.freqs[self.primary_index]), float(
            self.amps[self.primary_index]
        )

    def excluded_mask(self) -> np.ndarray:
        """Channels around DC and the primary peak, guards included."""
        return _excluded_mask(self.num_channels, self.primary_index, self.guard)

    def to_dict(self) -> dict:
        omega_p, h01 = self.primary_peak
        return {
            "h0": self.primary_dc,
            "h01": h01,
            "omega_p": omega_p,
            "noise_mean": self.noise_mean,
            "delta_h": self.noise_sd,
            "resolution": self.resolution,
            "num_samples": self.num_samples,
            "num_channels": self.num_channels,
            "guard": self.guard,
            "flags": list(self.flags),
        }


class PeakStats(NamedTuple):
    h0: float
    h01: float
    noise_mean: float
    delta_h: float


def _excluded_mask(num_channels: int, primary: int, guard: int) -> np.ndarray:
    mask = np.zeros(num_channels, dtype=bool)
    mask[: guard + 1] = True
    mask[max(0, primary - guard) : primary + guard + 1] = True
    return mask


def _check_uniform(times: np.ndarray) -> float:
    steps = np.diff(times)
    step = float(steps[0])
    if step <= 0.0 or not np.allclose(steps, step, rtol=1e-9, atol=1e-12):
        raise NonUniformSampling(
            f"Trace times must be uniformly spaced (spread {np.ptp(steps):.3e})"
        )
    return step


def _amplitudes(populations: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.rfft(populations)) / populations.shape[0]


def _primary_index(amps: np.ndarray) -> int:
    return 1 + int(np.argmax(amps[1:]))


def _noise(values: np.ndarray) -> Tuple[float, float]:
    if values.size == 0:
        return 0.0, 0.0
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return mean, sd


def dft(trace: RabiTrace, guard: int = DEFAULT_GUARD) -> Spectrum:
    """Normalised one-sided DFT of a trace.

    Args:
        trace: Uniformly sampled trace with at least four samples
        guard: Channels excluded on each side of DC and the primary peak when
            measuring the noise floor

    Returns:
        Spectrum on omega_j = j * 2 pi / t_ob for j = 0 .. K // 2

    Raises:
        TooShort: If the trace has fewer than four samples
        NonUniformSampling: If the sample times are not evenly spaced
    """
    num_samples = len(trace)
    if num_samples < MIN_SAMPLES:
        raise TooShort(f"DFT needs at least {MIN_SAMPLES} samples, got {num_samples}")
    if guard < 0:
        raise ValueError(f"guard must be non-negative, got {guard}")
    dt = _check_uniform(trace.times)
    amps = _amplitudes(trace.populations)
    resolution = 2.0 * math.pi / (num_samples * dt)
    freqs = np.arange(amps.shape[0]) * resolution
    primary = _primary_index(amps)

    flags = []
    if primary == amps.shape[0] - 1:
        flags.append(FLAG_PRIMARY_AT_EDGE)
        logger.warning("Primary peak sits in the last channel; neighbour clamped")

    noise_mean, noise_sd = _noise(amps[~_excluded_mask(amps.shape[0], primary, guard)])
    return Spectrum(
        freqs=freqs,
        amps=amps,
        resolution=resolution,
        num_samples=num_samples,
        primary_index=primary,
        guard=guard,
        noise_mean=noise_mean,
        noise_sd=noise_sd,
        flags=tuple(flags),
    )


def _trial_value(amps: np.ndarray) -> float:
    primary = _primary_index(amps)
    lower = primary - 1
    upper = primary + 1 if primary + 1 < amps.shape[0] else primary - 1
    neighbours = amps[lower] + amps[upper]
    if neighbours <= 0.0:
        return TRIAL_SATURATION
    return min(TRIAL_SATURATION, (2.0 * amps[primary] - neighbours) / neighbours)


def trial_function(spectrum: Spectrum) -> float:
    """Peak sharpness P = [2F(w_p) - F(w_p-1) - F(w_p+1)] / [F(w_p-1) + F(w_p+1)].

    Values are capped at ``TRIAL_SATURATION``.
    """
    return _trial_value(spectrum.amps)


def _samples_per_period(trace: RabiTrace) -> float:
    num_samples = len(trace)
    if num_samples < MIN_SAMPLES:
        raise TooShort(f"Trace has only {num_samples} samples")
    return num_samples / _primary_index(_amplitudes(trace.populations))


def min_window(trace: RabiTrace, min_periods: float = DEFAULT_MIN_PERIODS) -> int:
    """Shortest prefix covering ``min_periods`` periods of the primary tone."""
    samples_per_period = _samples_per_period(trace)
    return max(MIN_SAMPLES, math.ceil(min_periods * samples_per_period - 1e-9))


def scan_trial_function(
    trace: RabiTrace, min_periods: float = DEFAULT_MIN_PERIODS
) -> Tuple[np.ndarray, np.ndarray]:
    """Trial-function value of every prefix length within the last primary period.

    At most one period is trimmed from the end of the record, and never past
    the minimal window.

    Raises:
        TooShort: If the trace is shorter than the minimal window
    """
    shortest = min_window(trace, min_periods)
    _check_uniform(trace.times)
    if len(trace) < shortest:
        raise TooShort(
            f"Phase matching needs {shortest} samples "
            f"({min_periods:g} periods), got {len(trace)}"
        )
    tail = math.ceil(_samples_per_period(trace) - 1e-9)
    lengths = np.arange(max(shortest, len(trace) - tail), len(trace) + 1)
    scores = np.array(
        [_trial_value(_amplitudes(trace.populations[:length])) for length in lengths]
    )
    return lengths, scores


def phase_match(
    trace: RabiTrace, min_periods: float = DEFAULT_MIN_PERIODS
) -> RabiTrace:
    """Trim the end of a trace to the prefix with the sharpest primary peak.

    Prefixes whose trial values agree within a relative 1e-9 (including
    saturated ones) are tied and the longest one is kept.
    """
    lengths, scores = scan_trial_function(trace, min_periods)
    best = float(np.max(scores))
    tied = np.flatnonzero(scores >= best - 1e-9 * abs(best))
    length = int(lengths[tied[-1]])
    logger.debug("Phase matched %d -> %d samples (P=%.4g)", len(trace), length, best)
    return trace.prefix(length)


def peak_stats(spectrum: Spectrum) -> PeakStats:
    """h0, h01 and the noise floor statistics of a spectrum.

    Raises:
        TooShort: If the spectrum has fewer than eight channels
    """
    if spectrum.num_channels < MIN_CHANNELS:
        raise TooShort(
            f"Peak statistics need {MIN_CHANNELS} channels, "
            f"got {spectrum.num_channels}"
        )
    _, h01 = spectrum.primary_peak
    return PeakStats(
        h0=spectrum.primary_dc,
        h01=h01,
        noise_mean=spectrum.noise_mean,
        delta_h=spectrum.noise_sd,
    )


def transition_channels(spectrum: Spectrum, omegas: Sequence[float]) -> np.ndarray:
    """Nearest channel to each angular frequency, dropping those past Nyquist."""
    channels = np.rint(np.asarray(omegas, dtype=float) / spectrum.resolution)
    channels = channels[(channels >= 0) & (channels < spectrum.num_channels)]
    return np.unique(channels.astype(int))


def look_elsewhere_sigma(
    num_channels: int, false_alarm: float = DEFAULT_FALSE_ALARM
) -> float:
    """Threshold in noise standard deviations for a blind search.

    Noise amplitudes are Rayleigh distributed; the threshold keeps the chance
    that the largest of ``num_channels`` noise channels crosses it at
    ``false_alarm``. Never below 3.
    """
    if num_channels < 1:
        return 3.0
    per_channel = -math.expm1(math.log1p(-false_alarm) / num_channels)
    radius = math.sqrt(-2.0 * math.log(per_channel))
    mean = math.sqrt(math.pi / 2.0)
    sd = math.sqrt((4.0 - math.pi) / 2.0)
    return max(3.0, (radius - mean) / sd)


def third_peak_margin(
    spectrum: Spectrum,
    candidates: Optional[Sequence[float]] = None,
    sigma: Optional[float] = None,
    false_alarm: float = DEFAULT_FALSE_ALARM,
) -> float:
    """F(w') - nu_mean - sigma * delta_h for the strongest candidate channel.

    With ``candidates`` (known transition frequencies) only their channels are
    searched and ``sigma`` defaults to 3. Without them every free channel is a
    candidate and ``sigma`` comes from ``look_elsewhere_sigma``. Channels around
    DC and the primary peak are never candidates, and the tested channel is left
    out of the noise statistics. Returns -inf when no channel qualifies.
    """
    excluded = spectrum.excluded_mask()
    free = np.flatnonzero(~excluded)
    if candidates is not None:
        channels = np.setdiff1d(
            transition_channels(spectrum, candidates), np.flatnonzero(excluded)
        )
        pool = np.setdiff1d(free, channels)
        threshold = 3.0 if sigma is None else sigma
    else:
        channels = free
        threshold = (
            look_elsewhere_sigma(free.size, false_alarm) if sigma is None else sigma
        )
        pool = free
    if channels.size == 0:
        return -math.inf
    tested = int(channels[np.argmax(spectrum.amps[channels])])
    noise_mean, noise_sd = _noise(spectrum.amps[pool[pool != tested]])
    return float(spectrum.amps[tested] - noise_mean - threshold * noise_sd)


def third_peak_test(
    spectrum: Spectrum,
    candidates: Optional[Sequence[float]] = None,
    sigma: Optional[float] = None,
    false_alarm: float = DEFAULT_FALSE_ALARM,
) -> bool:
    """True when a channel beyond the two primary peaks rises above the noise."""
    return third_peak_margin(spectrum, candidates, sigma, false_alarm) > 0.0
