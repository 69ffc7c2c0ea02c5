"""File formats: Hamiltonian JSON, trace and spectrum CSV/JSON, run manifests.

Floats are written with ``repr`` so identical inputs give byte-identical files.
"""

import csv
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from . import __version__
from .core import HermitianOperator, QConfineError
from .simulate import RabiTrace
from .spectral import Spectrum

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRACE_HEADER = ("t", "p", "ne", "seed")
SPECTRUM_HEADER = ("omega", "amp")

# Unit conventions attached to JSON outputs
UNITS = {
    "time": "1/energy (hbar = 1)",
    "omega": "angular frequency, rad per unit time",
    "resolution": "angular frequency, rad per unit time",
    "delta_f": "ordinary frequency, cycles per unit time",
    "amp": "dimensionless, normalised by 1/K",
    "eps": "dimensionless population",
}


class HamiltonianFormatError(QConfineError):
    """Raised when a Hamiltonian file is malformed."""

    pass


class TraceFormatError(QConfineError):
    """Raised when a trace file is malformed."""

    pass


def _num(value: float) -> str:
    return repr(float(value))


def write_json(data: Mapping[str, Any], path: PathLike) -> Path:
    """Write JSON with sorted keys and a trailing newline."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return target


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# Hamiltonians


def hamiltonian_to_dict(hamiltonian: HermitianOperator) -> Dict[str, Any]:
    entries = hamiltonian.entries
    data: Dict[str, Any] = {
        "dim": hamiltonian.dim,
        "real": entries.real.tolist(),
    }
    if np.any(entries.imag):
        data["imag"] = entries.imag.tolist()
    return data


def _matrix_field(data: Mapping[str, Any], key: str, dim: int) -> np.ndarray:
    try:
        matrix = np.array(data[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise HamiltonianFormatError(f"Field '{key}' is not a numeric matrix: {e}")
    if matrix.shape != (dim, dim):
        raise HamiltonianFormatError(
            f"Field '{key}' must be {dim}x{dim}, got shape {matrix.shape}"
        )
    return matrix


def hamiltonian_from_dict(data: Mapping[str, Any]) -> HermitianOperator:
    """Decode {"dim", "real", "imag"?}; Hermiticity is checked by the operator.

    Raises:
        HamiltonianFormatError: Naming the offending field
        NonHermitianInput: If the matrix is not Hermitian
    """
    if not isinstance(data, Mapping):
        raise HamiltonianFormatError("Hamiltonian file must hold a JSON object")
    if "real" not in data:
        raise HamiltonianFormatError("Missing field 'real'")
    dim = data.get("dim")
    if dim is None:
        dim = len(data["real"])
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 2:
        raise HamiltonianFormatError(
            f"Field 'dim' must be an integer >= 2, got {dim!r}"
        )
    real = _matrix_field(data, "real", dim)
    imag = _matrix_field(data, "imag", dim) if "imag" in data else np.zeros_like(real)
    return HermitianOperator(real + 1j * imag)


def load_hamiltonian(path: PathLike) -> HermitianOperator:
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise HamiltonianFormatError(f"Invalid JSON in {path}: {e}")
    return hamiltonian_from_dict(data)


def dump_hamiltonian(hamiltonian: HermitianOperator, path: PathLike) -> Path:
    return write_json(hamiltonian_to_dict(hamiltonian), path)


# Traces


def write_trace_csv(trace: RabiTrace, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    seed = "" if trace.seed is None else str(trace.seed)
    with open(target, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for t, p in zip(trace.times, trace.populations):
            writer.writerow((_num(t), _num(p), trace.ensemble_size, seed))
    return target


def read_trace_csv(path: PathLike) -> RabiTrace:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise TraceFormatError(
                f"Trace CSV header must be {','.join(TRACE_HEADER)}, got {header}"
            )
        times: List[float] = []
        populations: List[float] = []
        ensemble_sizes = set()
        seeds = set()
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise TraceFormatError(
                    f"Line {line}: expected 4 fields, got {len(row)}"
                )
            try:
                times.append(float(row[0]))
                populations.append(float(row[1]))
                ensemble_sizes.add(int(row[2]))
            except ValueError as e:
                raise TraceFormatError(f"Line {line}: {e}")
            seeds.add(row[3].strip())
    if len(ensemble_sizes) > 1 or len(seeds) > 1:
        raise TraceFormatError("Columns 'ne' and 'seed' must be constant")
    if not times:
        raise TraceFormatError("Trace file holds no samples")
    seed = seeds.pop()
    return _trace(times, populations, ensemble_sizes.pop(), int(seed) if seed else None)


def trace_to_dict(trace: RabiTrace) -> Dict[str, Any]:
    return {
        "times": [float(t) for t in trace.times],
        "populations": [float(p) for p in trace.populations],
        "ensemble_size": trace.ensemble_size,
        "seed": trace.seed,
    }


def write_trace_json(trace: RabiTrace, path: PathLike) -> Path:
    return write_json(trace_to_dict(trace), path)


def read_trace_json(path: PathLike) -> RabiTrace:
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"Invalid JSON in {path}: {e}")
    for key in ("times", "populations"):
        if key not in data:
            raise TraceFormatError(f"Missing field '{key}'")
    return _trace(
        data["times"],
        data["populations"],
        int(data.get("ensemble_size", 0)),
        data.get("seed"),
    )


def _trace(
    times: Sequence[float],
    populations: Sequence[float],
    ensemble_size: int,
    seed: Optional[int],
) -> RabiTrace:
    try:
        trace = RabiTrace(times, populations, ensemble_size, seed)
    except ValueError as e:
        raise TraceFormatError(str(e))
    if np.any(trace.populations < 0.0) or np.any(trace.populations > 1.0):
        raise TraceFormatError("Field 'p' must lie in [0, 1]")
    return trace


def read_trace(path: PathLike) -> RabiTrace:
    """Read a trace, choosing the codec from the file suffix."""
    if Path(path).suffix.lower() == ".json":
        return read_trace_json(path)
    return read_trace_csv(path)


def write_trace(trace: RabiTrace, path: PathLike) -> Path:
    if Path(path).suffix.lower() == ".json":
        return write_trace_json(trace, path)
    return write_trace_csv(trace, path)


# Spectra


def write_spectrum(
    spectrum: Spectrum, csv_path: PathLike, json_path: PathLike
) -> List[Path]:
    """Write the "omega,amp" table and its JSON sidecar."""
    target = Path(csv_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SPECTRUM_HEADER)
        for omega, amp in zip(spectrum.freqs, spectrum.amps):
            writer.writerow((_num(omega), _num(amp)))
    sidecar = dict(spectrum.to_dict(), units=UNITS)
    return [target, write_json(sidecar, json_path)]


# Tabular records


def write_records_csv(
    rows: Iterable[Mapping[str, Any]], fieldnames: Sequence[str], path: PathLike
) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_cell(row.get(key)) for key in fieldnames})
    return target


def append_record_csv(
    row: Mapping[str, Any], fieldnames: Sequence[str], path: PathLike
) -> None:
    """Append one row, writing the header first if the file is new."""
    target = Path(path)
    is_new = not target.exists() or target.stat().st_size == 0
    with open(target, "a", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        if is_new:
            writer.writeheader()
        writer.writerow({key: format_cell(row.get(key)) for key in fieldnames})
        f.flush()


def read_records_csv(path: PathLike) -> List[Dict[str, str]]:
    target = Path(path)
    if not target.exists():
        return []
    with open(target, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return _num(value)
    return str(value)


# Manifests


def compute_file_hash(path: PathLike) -> str:
    """SHA256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def compute_data_hash(data: Mapping[str, Any]) -> str:
    """SHA256 of JSON data with sorted keys."""
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def get_current_timestamp() -> str:
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")


@dataclass
class RunManifest:
    """Everything needed to regenerate a command's outputs."""

    command: str
    inputs: List[str] = field(default_factory=list)
    seed: Optional[int] = None
    parameters: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    outputs: List[Dict[str, str]] = field(default_factory=list)
    duration_s: float = 0.0
    created: str = field(default_factory=get_current_timestamp)
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def add_output(self, path: PathLike) -> None:
        self.outputs.append({"path": str(path), "sha256": compute_file_hash(path)})

    def finish(self) -> None:
        self.duration_s = round(time.perf_counter() - self._started, 6)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("_started")
        return data

    def write(self, path: PathLike) -> Path:
        self.finish()
        return write_json(self.to_dict(), path)


def load_manifest(path: PathLike) -> Optional[Dict[str, Any]]:
    target = Path(path)
    if not target.exists():
        return None
    try:
        data = read_json(target)
    except (OSError, json.JSONDecodeError) as e:
        logger.warning("Ignoring unreadable manifest %s: %s", target, e)
        return None
    return data if isinstance(data, dict) else None
