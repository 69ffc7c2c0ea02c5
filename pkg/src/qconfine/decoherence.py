"""Markovian decoherence of a perfectly confined qubit.

The qubit Hamiltonian is (d/2)[cos(theta) Z + sin(theta) X] with Pauli X, Y, Z
jump operators at rates gamma_x, gamma_y, gamma_z. The density matrix is written
rho = I/2 + xX + yY + zZ, so a pure state has Bloch radius 1/2 and the
ground-state population is 1/2 + z.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import integrate, linalg

from .core import QConfineError
from .simulate import RabiTrace

logger = logging.getLogger(__name__)

DEFAULT_REGIME_RATIO = 50.0
# Resolvents with a larger condition number are treated as singular
MAX_CONDITION = 1e14
NORM_TOL = 1e-9

INITIAL_STATE = np.array([0.0, 0.0, 0.5])


class SingularResolvent(QConfineError):
    """Raised when A - i omega I cannot be inverted."""

    pass


class RegimeViolation(QConfineError):
    """Raised when the Lorentzian approximation is used outside d >> gamma."""

    pass


class DegenerateTarget(QConfineError):
    """Raised when a leakage target leaves no usable frequency resolution."""

    pass


@dataclass(frozen=True)
class DecoherenceConfig:
    """Qubit angle and gap plus Pauli channel rates."""

    theta: float
    gap: float
    gamma_x: float = 0.0
    gamma_y: float = 0.0
    gamma_z: float = 0.0
    regime_ratio: float = DEFAULT_REGIME_RATIO

    def __post_init__(self) -> None:
        if not self.gap > 0.0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        for name in ("gamma_x", "gamma_y", "gamma_z"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if not self.regime_ratio > 0.0:
            raise ValueError("regime_ratio must be positive")

    @classmethod
    def from_dict(
        cls, data: Mapping[str, Any], regime_ratio: float = DEFAULT_REGIME_RATIO
    ) -> "DecoherenceConfig":
        """Build from the {theta, d, gx, gy, gz} JSON layout."""
        missing = [key for key in ("theta", "d") if key not in data]
        if missing:
            raise KeyError(missing[0])
        return cls(
            theta=float(data["theta"]),
            gap=float(data["d"]),
            gamma_x=float(data.get("gx", 0.0)),
            gamma_y=float(data.get("gy", 0.0)),
            gamma_z=float(data.get("gz", 0.0)),
            regime_ratio=float(data.get("regime_ratio", regime_ratio)),
        )

    def to_dict(self) -> Dict[str, float]:
        return {
            "theta": self.theta,
            "d": self.gap,
            "gx": self.gamma_x,
            "gy": self.gamma_y,
            "gz": self.gamma_z,
        }

    @property
    def gamma_alpha(self) -> float:
        """Width of the DC Lorentzian."""
        cos2 = math.cos(self.theta) ** 2
        spread = cos2 * (self.gamma_x - self.gamma_z)
        return 2.0 * (self.gamma_y + self.gamma_z + spread)

    @property
    def gamma_beta(self) -> float:
        """Width of the Rabi Lorentzian."""
        sin2 = math.sin(self.theta) ** 2
        return (
            self.gamma_x * (1.0 + sin2)
            + self.gamma_y
            + self.gamma_z * (2.0 - sin2)
        )

    @property
    def max_rate(self) -> float:
        return max(self.gamma_x, self.gamma_y, self.gamma_z)

    @property
    def lorentzian_valid(self) -> bool:
        return self.gap > self.regime_ratio * self.max_rate

    @property
    def rabi_period(self) -> float:
        return 2.0 * math.pi / self.gap


@dataclass(frozen=True)
class BlochState:
    x: float
    y: float
    z: float
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.x**2 + self.y**2 + self.z**2 > 0.25 + NORM_TOL:
            raise ValueError(f"Bloch vector longer than 1/2 at t={self.time}")

    @property
    def radius(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    @property
    def ground_population(self) -> float:
        return 0.5 + self.z


def bloch_matrix(cfg: DecoherenceConfig) -> np.ndarray:
    """Generator A of dS/dt = A S for S = (x, y, z)."""
    c = cfg.gap * math.cos(cfg.theta)
    s = cfg.gap * math.sin(cfg.theta)
    gx, gy, gz = cfg.gamma_x, cfg.gamma_y, cfg.gamma_z
    return np.array(
        [
            [-2.0 * (gy + gz), -c, 0.0],
            [c, -2.0 * (gx + gz), -s],
            [0.0, s, -2.0 * (gx + gy)],
        ]
    )


def bloch_trajectory(cfg: DecoherenceConfig, times: Sequence[float]) -> np.ndarray:
    """Bloch vectors on a uniform time grid starting from |0>.

    Steps the exact propagator expm(A dt), so the only error is rounding.

    Returns:
        Array of shape (len(times), 3)
    """
    times_arr = np.asarray(times, dtype=float)
    if times_arr.ndim != 1 or times_arr.size == 0:
        raise ValueError("times must be a non-empty vector")
    generator = bloch_matrix(cfg)
    states = np.empty((times_arr.size, 3))
    states[0] = linalg.expm(generator * times_arr[0]) @ INITIAL_STATE
    if times_arr.size > 1:
        steps = np.diff(times_arr)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("times must be uniformly spaced")
        step = linalg.expm(generator * steps[0])
        for k in range(1, times_arr.size):
            states[k] = step @ states[k - 1]
    return states


def state_at(cfg: DecoherenceConfig, t: float) -> BlochState:
    x, y, z = linalg.expm(bloch_matrix(cfg) * t) @ INITIAL_STATE
    return BlochState(float(x), float(y), float(z), t)


def evolve_bloch(cfg: DecoherenceConfig, times: Sequence[float]) -> RabiTrace:
    """Ground-state population 1/2 + z(t) as an ideal Rabi trace."""
    states = bloch_trajectory(cfg, times)
    populations = np.clip(0.5 + states[:, 2], 0.0, 1.0)
    return RabiTrace(np.asarray(times, dtype=float), populations, ensemble_size=0)


def analytic_spectrum(cfg: DecoherenceConfig, omegas: Sequence[float]) -> np.ndarray:
    """One-sided transform of z(t), from S(omega) = -(A - i omega I)^-1 S(0).

    Raises:
        SingularResolvent: If the resolvent is singular at some omega
    """
    generator = bloch_matrix(cfg).astype(complex)
    identity = np.eye(3)
    values = np.empty(len(omegas), dtype=complex)
    for index, omega in enumerate(omegas):
        resolvent = generator - 1j * omega * identity
        if np.linalg.cond(resolvent) > MAX_CONDITION:
            raise SingularResolvent(f"A - i*omega*I is singular at omega={omega:g}")
        values[index] = -linalg.solve(resolvent, INITIAL_STATE)[2]
    return values


def numeric_transform(trace: RabiTrace, omegas: Sequence[float]) -> np.ndarray:
    """Trapezoidal one-sided transform of z(t) = p(t) - 1/2 over the trace."""
    z = trace.populations - 0.5
    phases = np.exp(-1j * np.outer(np.asarray(omegas, dtype=float), trace.times))
    return integrate.trapezoid(phases * z, trace.times, axis=1)


@dataclass(frozen=True)
class LorentzianPeaks:
    """Lorentzian approximations of the DC and Rabi peaks.

    ``dc_shape`` and ``rabi_shape`` follow the real part of the one-sided
    transform; the ``*_density`` forms are those divided by pi and integrate
    to the peak areas. The 1/2 DC offset is a delta function kept separately.
    """

    gamma_alpha: float
    gamma_beta: float
    dc_weight: float
    rabi_weight: float
    gap: float
    dc_offset: float = 0.5

    def dc_shape(self, omega: np.ndarray) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return self.dc_weight * self.gamma_alpha / (omega**2 + self.gamma_alpha**2)

    def rabi_shape(self, omega: np.ndarray) -> np.ndarray:
        detuning = np.abs(np.asarray(omega, dtype=float)) - self.gap
        return self.rabi_weight * self.gamma_beta / (detuning**2 + self.gamma_beta**2)

    def dc_density(self, omega: np.ndarray) -> np.ndarray:
        return self.dc_shape(omega) / math.pi

    def rabi_density(self, omega: np.ndarray) -> np.ndarray:
        return self.rabi_shape(omega) / math.pi


def lorentzian_peaks(cfg: DecoherenceConfig) -> LorentzianPeaks:
    """Lorentzian parameters of the decohered spectrum.

    Raises:
        RegimeViolation: Unless d > regime_ratio * max(gamma)
    """
    if not cfg.lorentzian_valid:
        raise RegimeViolation(
            f"Lorentzian approximation needs d > {cfg.regime_ratio:g} * max rate "
            f"(d={cfg.gap:g}, max rate={cfg.max_rate:g})"
        )
    return LorentzianPeaks(
        gamma_alpha=cfg.gamma_alpha,
        gamma_beta=cfg.gamma_beta,
        dc_weight=math.cos(cfg.theta) ** 2 / 2.0,
        rabi_weight=math.sin(cfg.theta) ** 2 / 4.0,
        gap=cfg.gap,
    )


def peak_area(cfg: DecoherenceConfig, eta: float) -> Tuple[float, float]:
    """DC and Rabi peak heights collected within +/- eta of each centre.

    Returns:
        (h0(eta), h01(eta)); h0 includes the 1/2 DC offset
    """
    if not eta > 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    h0 = 0.5 + math.cos(cfg.theta) ** 2 / math.pi * math.atan2(eta, cfg.gamma_alpha)
    h01 = math.sin(cfg.theta) ** 2 / (2.0 * math.pi) * math.atan2(eta, cfg.gamma_beta)
    return h0, h01


class ResolutionBound(NamedTuple):
    delta_omega: float
    delta_f: float
    t_ob: float


def max_resolution(gamma: float, zeta: float) -> ResolutionBound:
    """Coarsest DFT resolution that still resolves leakage down to ``zeta``.

    Solves pi (1 - 2 zeta)^2 / 2 = arctan(delta_omega / gamma), taking equal DC
    and Rabi widths. ``t_ob`` = 2 pi / delta_omega is the longest observation
    time for which the decoherence-broadened peaks keep eps_high <= zeta.

    Raises:
        DegenerateTarget: If zeta is not in (0, 1/2)
    """
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not 0.0 < zeta < 0.5:
        raise DegenerateTarget(f"Leakage target must lie in (0, 1/2), got {zeta}")
    delta_omega = gamma * math.tan(math.pi * (1.0 - 2.0 * zeta) ** 2 / 2.0)
    if delta_omega <= 0.0:
        raise DegenerateTarget(f"No resolution satisfies zeta={zeta}")
    return ResolutionBound(
        delta_omega=delta_omega,
        delta_f=delta_omega / (2.0 * math.pi),
        t_ob=2.0 * math.pi / delta_omega,
    )
