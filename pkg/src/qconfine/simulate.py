"""Rabi oscillation records under a ground-state-only measurement model.

Only |0> is detected: at each time step the population of |0> is either known
exactly (ideal traces) or estimated from N_e projective shots (sampled traces).
This module also houses the trial Hamiltonian families and the random leaky
ensemble used by validation campaigns.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import HermitianOperator, QConfineError, eigendecompose, rabi_period

logger = logging.getLogger(__name__)

# Level energies of the trial families and of the random leaky ensemble
FAMILY_LEVELS = (0.0, 1.0, 1.5, 1.7, 1.9, 2.2, 2.5, 2.7, 3.0, 3.2)
RANDOM_LEVELS = (0.0, 1.0, 1.5, 2.0, 2.4, 2.5, 2.9, 3.0, 3.3, 4.0)
DEFAULT_COUPLING_RANGE = (0.005, 0.02)
MAX_SEED = 2**64


class UnknownFamily(QConfineError):
    """Raised for a Hamiltonian family name that does not exist."""

    pass


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from ``seed`` and integer keys."""
    sequence = np.random.SeedSequence([seed, *keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator used for every random draw in qconfine."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SamplingPlan:
    """Time grid and measurement budget of a Rabi experiment."""

    dt: float
    num_samples: int
    ensemble_size: int = 1024
    seed: int = 0
    rabi_period: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.num_samples < 2:
            raise ValueError(f"num_samples must be at least 2, got {self.num_samples}")
        if self.ensemble_size < 0:
            raise ValueError(
                f"ensemble_size must be non-negative, got {self.ensemble_size}"
            )
        if not 0 <= self.seed < MAX_SEED:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.rabi_period is not None and self.dt > self.rabi_period / 2.0:
            raise ValueError(
                f"dt = {self.dt:.6g} violates the Nyquist limit "
                f"T/2 = {self.rabi_period / 2.0:.6g}"
            )

    @classmethod
    def for_hamiltonian(
        cls,
        hamiltonian: HermitianOperator,
        cycles: float = 30.0,
        samples_per_period: int = 20,
        ensemble_size: int = 1024,
        seed: int = 0,
        dt: Optional[float] = None,
    ) -> "SamplingPlan":
        """Plan spanning ``cycles`` periods of the dominant transition.

        With the default ``dt = T / samples_per_period`` the primary tone falls
        exactly on a DFT channel of the full record.
        """
        period = rabi_period(hamiltonian)
        if samples_per_period < 2 and dt is None:
            raise ValueError("samples_per_period must be at least 2")
        step = period / samples_per_period if dt is None else dt
        num_samples = int(round(cycles * period / step))
        return cls(
            dt=step,
            num_samples=num_samples,
            ensemble_size=ensemble_size,
            seed=seed,
            rabi_period=period,
        )

    @property
    def t_ob(self) -> float:
        """Total observation time K * dt."""
        return self.num_samples * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.num_samples) * self.dt

    def with_ensemble(
        self, ensemble_size: int, seed: Optional[int] = None
    ) -> "SamplingPlan":
        return dataclasses.replace(
            self,
            ensemble_size=ensemble_size,
            seed=self.seed if seed is None else seed,
        )


@dataclass(frozen=True, eq=False)
class RabiTrace:
    """Uniformly sampled ground-state populations.

    ``ensemble_size`` is 0 for ideal records; ``seed`` is None for them.
    """

    times: np.ndarray
    populations: np.ndarray
    ensemble_size: int = 0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        populations = np.array(self.populations, dtype=float)
        if times.ndim != 1 or times.shape != populations.shape:
            raise ValueError(
                f"times and populations must be equal-length vectors, "
                f"got {times.shape} and {populations.shape}"
            )
        times.setflags(write=False)
        populations.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "populations", populations)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def is_ideal(self) -> bool:
        return self.ensemble_size == 0

    @property
    def dt(self) -> float:
        if len(self) < 2:
            raise ValueError("A trace needs two samples to define dt")
        return float(self.times[1] - self.times[0])

    @property
    def t_ob(self) -> float:
        return len(self) * self.dt

    def prefix(self, length: int) -> "RabiTrace":
        """The first ``length`` samples."""
        if not 1 <= length <= len(self):
            raise ValueError(f"Prefix length {length} out of range 1..{len(self)}")
        return RabiTrace(
            self.times[:length],
            self.populations[:length],
            self.ensemble_size,
            self.seed,
        )


def ideal_trace(hamiltonian: HermitianOperator, plan: SamplingPlan) -> RabiTrace:
    """Noiseless f(t_k) = |<0|U(t_k)|0>|^2 on the plan's grid."""
    system = eigendecompose(hamiltonian)
    weights = system.ground_weights()
    times = plan.times()
    amplitude = np.exp(-1j * np.outer(times, system.eigenvalues)) @ weights
    populations = np.clip(np.abs(amplitude) ** 2, 0.0, 1.0)
    return RabiTrace(times, populations, ensemble_size=0, seed=None)


def resample(trace: RabiTrace, ensemble_size: int, seed: int) -> RabiTrace:
    """Binomial projection noise on top of an ideal trace.

    Each p_k is the fraction of ``ensemble_size`` shots that returned 0. Sample k
    draws from its own stream seeded by ``derive_seed(seed, k)``, so a sample's
    value does not depend on how many points surround it.
    """
    if not trace.is_ideal:
        raise ValueError("resample expects an ideal trace")
    if ensemble_size < 1:
        raise ValueError(f"ensemble_size must be at least 1, got {ensemble_size}")
    counts = np.array(
        [
            make_rng(derive_seed(seed, index)).binomial(ensemble_size, population)
            for index, population in enumerate(trace.populations)
        ],
        dtype=float,
    )
    return RabiTrace(
        trace.times, counts / ensemble_size, ensemble_size=ensemble_size, seed=seed
    )



def sample_trace(hamiltonian: HermitianOperator, plan: SamplingPlan) -> RabiTrace:
    """Simulate a measured Rabi record; ``ensemble_size = 0`` gives the ideal one."""
    ideal = ideal_trace(hamiltonian, plan)
    if plan.ensemble_size == 0:
        return ideal
    logger.debug(
        "Sampling %d points with N_e=%d seed=%d",
        plan.num_samples,
        plan.ensemble_size,
        plan.seed,
    )
    return resample(ideal, plan.ensemble_size, plan.seed)


def _star(levels: Sequence[float], couplings: Sequence[float]) -> HermitianOperator:
    """Diagonal levels coupled to |0> only; couplings[k] links |0> and |k+1>."""
    matrix = np.diag(np.asarray(levels, dtype=float))
    for k, coupling in enumerate(couplings, start=1):
        matrix[0, k] = matrix[k, 0] = coupling
    return HermitianOperator(matrix)


def _truncated_family(dim: int, gamma: float) -> HermitianOperator:
    return _star(FAMILY_LEVELS[:dim], [1.0] + [gamma] * (dim - 2))


def _five_level(leaky: bool) -> HermitianOperator:
    levels = (0.0, 1.0, 1.5, 1.7, 2.0)
    couplings = (1.0, 0.01, 0.005, 0.0) if leaky else (1.0, 0.0, 0.0, 0.0)
    return _star(levels, couplings)


FAMILY_NAMES = ("Hm", "Hn", "Ha", "Hb") + tuple(f"H{n}" for n in range(3, 11))


def family(name: str, gamma: float = 0.0) -> HermitianOperator:
    """Return a trial Hamiltonian by name.

    ``H3`` ... ``H10`` are leading truncations of a ten-level system with the
    qubit coupling 1 and every other level coupled to |0> by ``gamma``.
    ``Hm`` and ``Hn`` are ``H3`` at 0.5 and 0.01; ``Ha``/``Hb`` are five-level
    systems with the qubit block decoupled or weakly leaking. ``gamma`` is
    ignored for the named systems.

    Raises:
        UnknownFamily: If ``name`` is not a known family
    """
    if name == "Hm":
        return _truncated_family(3, 0.5)
    if name == "Hn":
        return _truncated_family(3, 0.01)
    if name == "Ha":
        return _five_level(leaky=False)
    if name == "Hb":
        return _five_level(leaky=True)
    if name.startswith("H") and name[1:].isdigit():
        dim = int(name[1:])
        if 3 <= dim <= len(FAMILY_LEVELS):
            return _truncated_family(dim, gamma)
    raise UnknownFamily(f"Unknown family: {name}. Must be one of: {list(FAMILY_NAMES)}")


def random_leaky_hamiltonian(
    seed: int, coupling_range: Tuple[float, float] = DEFAULT_COUPLING_RANGE
) -> HermitianOperator:
    """Random weakly leaking Hamiltonian.

    The dimension is uniform in 2..10; levels above the qubit couple to |0>
    with strengths uniform in ``coupling_range`` (qubit coupling 1).
    """
    rng = make_rng(seed)
    dim = int(rng.integers(2, len(RANDOM_LEVELS) + 1))
    low, high = coupling_range
    couplings = rng.uniform(low, high, size=dim - 2)
    return _star(RANDOM_LEVELS[:dim], [1.0, *couplings.tolist()])
