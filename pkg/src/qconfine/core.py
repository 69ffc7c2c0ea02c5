"""Dense Hermitian linear algebra and closed-form leakage quantities.

Everything in this module works directly from a Hamiltonian (hbar = 1) and is
the reference the simulation and estimation layers are checked against. All
functions are pure; the value types are frozen and their arrays read-only.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Tolerances
HERMITIAN_ATOL = 1e-12
DEGENERACY_TOL = 1e-9
PHASE_ATOL = 1e-10


class QConfineError(Exception):
    """Base class for every error raised by qconfine."""

    pass


class NonHermitianInput(QConfineError):
    """Raised when a matrix is not square, too small, or not Hermitian."""

    pass


class RadicandNegative(QConfineError):
    """Raised when the upper leakage bound is undefined for a Hamiltonian."""

    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense N x N Hermitian matrix in dimensionless energy units.

    Level 0 and level 1 span the qubit subspace; the system starts in |0>.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise NonHermitianInput(f"Matrix must be square, got shape {matrix.shape}")
        if matrix.shape[0] < 2:
            raise NonHermitianInput("Matrix dimension must be at least 2")
        if not np.all(np.isfinite(matrix)):
            raise NonHermitianInput("Matrix entries must be finite")
        deviation = float(np.max(np.abs(matrix - matrix.conj().T)))
        if deviation > HERMITIAN_ATOL:
            raise NonHermitianInput(
                f"Matrix is not Hermitian (max |H - H^dagger| = {deviation:.3e})"
            )
        object.__setattr__(self, "entries", _frozen(matrix))

    @property
    def dim(self) -> int:
        """Number of levels."""
        return int(self.entries.shape[0])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[complex]]) -> "HermitianOperator":
        """Build an operator from nested row sequences."""
        return cls(np.asarray(rows, dtype=complex))

    def truncate(self, dim: int) -> "HermitianOperator":
        """Keep the leading ``dim`` levels."""
        if not 2 <= dim <= self.dim:
            raise ValueError(f"Cannot truncate a {self.dim}-level operator to {dim}")
        return HermitianOperator(self.entries[:dim, :dim])


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    def ground_weights(self) -> np.ndarray:
        """Return |c_a|^2, the weight of |0> on each eigenvector."""
        return np.abs(self.eigenvectors[0, :]) ** 2

    def reconstruct(self) -> np.ndarray:
        """Return A diag(lambda) A^dagger."""
        vectors = self.eigenvectors
        return (vectors * self.eigenvalues) @ vectors.conj().T

    def propagator(self, t: float) -> np.ndarray:
        """Return U(t) = A exp(-i diag(lambda) t) A^dagger."""
        vectors = self.eigenvectors
        phases = np.exp(-1j * self.eigenvalues * t)
        return (vectors * phases) @ vectors.conj().T


@dataclass(frozen=True)
class Transition:
    """A Fourier peak at |lambda_a - lambda_b| with height |c_a|^2 |c_b|^2."""

    a: int
    b: int
    height: float
    omega: float


@dataclass(frozen=True)
class PeakSet:
    """Analytic Fourier peak heights of the ground-state population signal."""

    h0: float
    pairs: Tuple[Transition, ...]
    weights: Tuple[float, ...]

    @property
    def primary(self) -> Transition:
        """The dominant transition (largest height, first in (a, b) order on ties)."""
        best = self.pairs[0]
        for pair in self.pairs[1:]:
            if pair.height > best.height:
                best = pair
        return best

    @property
    def primary_pair(self) -> Tuple[int, int]:
        primary = self.primary
        return primary.a, primary.b

    def height(self, a: int, b: int) -> float:
        """Peak height of the (a, b) transition, symmetric in its arguments."""
        lo, hi = min(a, b), max(a, b)
        for pair in self.pairs:
            if pair.a == lo and pair.b == hi:
                return pair.height
        raise KeyError(f"No transition ({a}, {b})")

    def leakage_transitions(self, min_height: float = 0.0) -> List[Transition]:
        """Transitions other than the primary with height above ``min_height``."""
        key = self.primary_pair
        return [
            pair
            for pair in self.pairs
            if (pair.a, pair.b) != key and pair.height > min_height
        ]

    def conservation(self) -> float:
        """h0 + 2 * sum(h_ab); equals one for every Hamiltonian."""
        return self.h0 + 2.0 * sum(pair.height for pair in self.pairs)


def _rebase_degenerate(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Fix the basis inside degenerate eigenspaces.

    Each cluster is re-spanned by Gram-Schmidt over the projections of the
    canonical basis vectors e_0, e_1, ... taken in ascending order.
    """
    dim = values.shape[0]
    start = 0
    while start < dim:
        stop = start + 1
        while stop < dim and values[stop] - values[stop - 1] < DEGENERACY_TOL * max(
            1.0, abs(values[stop])
        ):
            stop += 1
        size = stop - start
        if size > 1:
            block = vectors[:, start:stop]
            projector = block @ block.conj().T
            basis: List[np.ndarray] = []
            for index in range(dim):
                candidate = projector[:, index].copy()
                for done in basis:
                    candidate -= (done.conj() @ candidate) * done
                norm = np.linalg.norm(candidate)
                if norm > 1e-8:
                    basis.append(candidate / norm)
                if len(basis) == size:
                    break
            vectors[:, start:stop] = np.column_stack(basis)
            logger.debug("Rebased %d-fold degenerate eigenspace at %d", size, start)
        start = stop
    return vectors


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    for column in range(vectors.shape[1]):
        vector = vectors[:, column]
        leading = np.flatnonzero(np.abs(vector) > PHASE_ATOL)
        if leading.size:
            pivot = vector[leading[0]]
            vectors[:, column] = vector * (abs(pivot) / pivot)
    return vectors


def eigendecompose(hamiltonian: HermitianOperator) -> EigenSystem:
    """Diagonalise a Hermitian operator deterministically.

    Args:
        hamiltonian: Operator to diagonalise

    Returns:
        EigenSystem with ascending eigenvalues. Degenerate eigenspaces are
        re-based against the canonical basis and every eigenvector has its
        first non-negligible entry real and positive, so the result does not
        depend on the LAPACK driver.
    """
    values, vectors = np.linalg.eigh(hamiltonian.entries)
    vectors = _rebase_degenerate(values, np.array(vectors, dtype=complex))
    vectors = _fix_phases(vectors)
    return EigenSystem(_frozen(np.array(values, dtype=float)), _frozen(vectors))


def propagate(hamiltonian: HermitianOperator, t: float) -> np.ndarray:
    """Return the unitary U(t) = exp(-iHt)."""
    if not math.isfinite(t):
        raise ValueError(f"Time must be finite, got {t}")
    return eigendecompose(hamiltonian).propagator(t)


def analytic_peaks(hamiltonian: HermitianOperator) -> PeakSet:
    """Compute the Fourier peak heights of f(t) = |<0|U(t)|0>|^2.

    h0 = sum |c_a|^4 sits at zero frequency and every pair a < b contributes a
    peak |c_a|^2 |c_b|^2 at |lambda_a - lambda_b|.
    """
    system = eigendecompose(hamiltonian)
    weights = system.ground_weights()
    values = system.eigenvalues
    pairs = tuple(
        Transition(
            a=a,
            b=b,
            height=float(weights[a] * weights[b]),
            omega=float(abs(values[b] - values[a])),
        )
        for a in range(system.dim)
        for b in range(a + 1, system.dim)
    )
    return PeakSet(
        h0=float(np.sum(weights**2)),
        pairs=pairs,
        weights=tuple(float(w) for w in weights),
    )


def exact_leakage(hamiltonian: HermitianOperator) -> float:
    """Return the exact subspace leakage of a Hamiltonian.

    The leakage is the weight of |0> outside the two eigenstates of the
    dominant transition, 1 - |c_p|^2 - |c_q|^2. The dominant pair is always
    the pair with the two largest weights.
    """
    weights = np.sort(eigendecompose(hamiltonian).ground_weights())
    return float(max(0.0, 1.0 - weights[-1] - weights[-2]))


def exact_leakage_from_peaks(peaks: PeakSet) -> float:
    """Exact leakage reconstructed from peak heights alone.

    Uses eps = sum_a sqrt(h_ap * h_aq / h_pq) over the eigenstates a outside
    the primary pair (p, q). Needs the peak-to-transition assignment, so it
    only applies to analytic peak sets.
    """
    p, q = peaks.primary_pair
    h_pq = peaks.height(p, q)
    if h_pq <= 0.0:
        return 0.0
    total = 0.0
    for a in range(len(peaks.weights)):
        if a in (p, q):
            continue
        total += math.sqrt(peaks.height(a, p) * peaks.height(a, q) / h_pq)
    return total


def analytic_bounds(peaks: PeakSet) -> Tuple[float, float]:
    """Lower and upper leakage bounds from h0 and the primary peak height.

    Raises:
        RadicandNegative: If 2 h0 + 4 h01 - 1 < 0
    """
    h01 = peaks.primary.height
    total = peaks.h0 + 2.0 * h01
    radicand = 2.0 * total - 1.0
    if radicand < 0.0:
        raise RadicandNegative(
            f"Upper bound undefined: 2*h0 + 4*h01 - 1 = {radicand:.3e} < 0"
        )
    eps_low = max(0.0, 1.0 - math.sqrt(total))
    eps_high = max(0.0, 0.5 * (1.0 - math.sqrt(radicand)))
    return eps_low, eps_high


def rabi_period(hamiltonian: HermitianOperator) -> float:
    """Period 2 pi / omega of the dominant transition."""
    primary = analytic_peaks(hamiltonian).primary
    if primary.height <= 0.0 or primary.omega <= 0.0:
        raise QConfineError("Hamiltonian has no Rabi oscillation out of |0>")
    return 2.0 * math.pi / primary.omega


def leakage_trace(hamiltonian: HermitianOperator, times: Sequence[float]) -> np.ndarray:
    """Population outside span{|0>, |1>} at each time, starting from |0>."""
    system = eigendecompose(hamiltonian)
    vectors = system.eigenvectors
    times_arr = np.asarray(times, dtype=float)
    # psi(t) = A exp(-i lambda t) A^dagger |0>
    phases = np.exp(-1j * np.outer(times_arr, system.eigenvalues))
    amplitudes = (phases * vectors[0, :].conj()) @ vectors.T
    qubit = np.sum(np.abs(amplitudes[:, :2]) ** 2, axis=1)
    return np.clip(1.0 - qubit, 0.0, 1.0)


def time_averaged_leakage(hamiltonian: HermitianOperator) -> float:
    """Long-time average of ``leakage_trace`` for a non-degenerate spectrum.

    Evaluates sum_a sum_{k >= 2} |A_ka|^2 |c_a|^2.
    """
    system = eigendecompose(hamiltonian)
    outside = np.sum(np.abs(system.eigenvectors[2:, :]) ** 2, axis=0)
    return float(np.dot(outside, system.ground_weights()))


def random_hermitian(
    rng: np.random.Generator, dim: int, scale: float = 1.0, real: bool = False
) -> HermitianOperator:
    """Draw a random dense Hermitian operator (Gaussian entries)."""
    matrix = rng.normal(scale=scale, size=(dim, dim)).astype(complex)
    if not real:
        matrix = matrix + 1j * rng.normal(scale=scale, size=(dim, dim))
    return HermitianOperator((matrix + matrix.conj().T) / 2.0)


def optional_bounds(peaks: PeakSet) -> Tuple[float, Optional[float]]:
    """Like ``analytic_bounds`` but returns ``None`` for an undefined upper bound."""
    try:
        return analytic_bounds(peaks)
    except RadicandNegative:
        total = peaks.h0 + 2.0 * peaks.primary.height
        return max(0.0, 1.0 - math.sqrt(total)), None
