"""Tests for file formats and run manifests."""

import json

import numpy as np
import pytest
from freezegun import freeze_time

from qconfine import __version__
from qconfine.core import NonHermitianInput
from qconfine.formats import (
    SPECTRUM_HEADER,
    TRACE_HEADER,
    HamiltonianFormatError,
    RunManifest,
    TraceFormatError,
    append_record_csv,
    compute_data_hash,
    compute_file_hash,
    dump_hamiltonian,
    format_cell,
    get_current_timestamp,
    hamiltonian_from_dict,
    load_hamiltonian,
    load_manifest,
    read_records_csv,
    read_trace,
    write_records_csv,
    write_spectrum,
    write_trace,
)
from qconfine.simulate import RabiTrace, SamplingPlan, family, sample_trace
from qconfine.spectral import dft


@pytest.mark.unit
class TestHamiltonianFiles:
    """Test the {dim, real, imag} codec."""

    def test_complex_file(self, tmp_path):
        """Test real and imaginary parts combine."""
        path = tmp_path / "h.json"
        path.write_text(
            json.dumps(
                {"dim": 2, "real": [[0, 0.5], [0.5, 1]], "imag": [[0, -0.1], [0.1, 0]]}
            )
        )
        hamiltonian = load_hamiltonian(path)
        assert hamiltonian.entries[0, 1] == pytest.approx(0.5 - 0.1j)

    def test_dim_optional(self):
        """Test dim defaults to the row count and imag to zero."""
        hamiltonian = hamiltonian_from_dict({"real": [[0, 1], [1, 0]]})
        assert hamiltonian.dim == 2

    def test_dump_writes_imag_only_when_needed(self, tmp_path):
        """Test real operators omit the imaginary part on disk."""
        path = dump_hamiltonian(family("H3", 0.01), tmp_path / "h3.json")
        data = json.loads(path.read_text())
        assert data["dim"] == 3
        assert "imag" not in data
        np.testing.assert_array_equal(
            load_hamiltonian(path).entries, family("H3", 0.01).entries
        )

    @pytest.mark.parametrize(
        "data, field",
        [
            ({"dim": 2}, "real"),
            ({"dim": 3, "real": [[0, 1], [1, 0]]}, "real"),
            ({"dim": 1, "real": [[0]]}, "dim"),
            ({"real": [[0, 1], [1, 0]], "imag": [[0, 0]]}, "imag"),
            ({"real": [["a", 1], [1, 0]]}, "real"),
        ],
    )
    def test_malformed(self, data, field):
        """Test malformed files name the offending field."""
        with pytest.raises(HamiltonianFormatError, match=field):
            hamiltonian_from_dict(data)

    def test_invalid_json(self, tmp_path):
        """Test unparsable files raise a format error."""
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(HamiltonianFormatError):
            load_hamiltonian(path)

    def test_non_hermitian(self):
        """Test asymmetric matrices are rejected after decoding."""
        with pytest.raises(NonHermitianInput):
            hamiltonian_from_dict({"real": [[0, 1], [0, 0]]})


@pytest.mark.unit
class TestTraceFiles:
    """Test trace CSV and JSON files."""

    @pytest.fixture
    def sampled(self, two_level):
        plan = SamplingPlan.for_hamiltonian(
            two_level, cycles=5, ensemble_size=64, seed=12
        )
        return sample_trace(two_level, plan)

    @pytest.mark.parametrize("suffix", [".csv", ".json"])
    def test_lossless(self, sampled, tmp_path, suffix):
        """Test traces survive a write and read unchanged."""
        loaded = read_trace(write_trace(sampled, tmp_path / f"trace{suffix}"))
        np.testing.assert_array_equal(loaded.times, sampled.times)
        np.testing.assert_array_equal(loaded.populations, sampled.populations)
        assert loaded.ensemble_size == 64
        assert loaded.seed == 12

    def test_csv_layout(self, sampled, tmp_path):
        """Test the CSV header and constant columns."""
        path = write_trace(sampled, tmp_path / "trace.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert lines[1].endswith(",64,12")
        assert len(lines) == len(sampled) + 1

    def test_deterministic_bytes(self, sampled, tmp_path):
        """Test identical traces give identical files."""
        first = write_trace(sampled, tmp_path / "a.csv")
        second = write_trace(sampled, tmp_path / "b.csv")
        assert compute_file_hash(first) == compute_file_hash(second)

    def test_ideal_trace_has_blank_seed(self, two_level_trace, tmp_path):
        """Test ideal traces store ne = 0 and no seed."""
        path = write_trace(two_level_trace, tmp_path / "ideal.csv")
        assert path.read_text().splitlines()[1].endswith(",0,")
        loaded = read_trace(path)
        assert loaded.is_ideal
        assert loaded.seed is None

    @pytest.mark.parametrize(
        "content, message",
        [
            ("time,p,ne,seed\n0,1,0,\n", "header"),
            ("t,p,ne,seed\n0,1,0\n", "expected 4 fields"),
            ("t,p,ne,seed\n0,x,0,\n", "Line 2"),
            ("t,p,ne,seed\n0,1,0,\n1,0.5,8,\n", "constant"),
            ("t,p,ne,seed\n0,1.5,0,\n1,0.5,0,\n", "\\[0, 1\\]"),
            ("t,p,ne,seed\n", "no samples"),
        ],
    )
    def test_malformed_csv(self, tmp_path, content, message):
        """Test malformed trace files are rejected with a reason."""
        path = tmp_path / "bad.csv"
        path.write_text(content)
        with pytest.raises(TraceFormatError, match=message):
            read_trace(path)

    def test_json_missing_field(self, tmp_path):
        """Test a JSON trace needs times and populations."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"times": [0, 1]}))
        with pytest.raises(TraceFormatError, match="populations"):
            read_trace(path)


@pytest.mark.unit
class TestSpectrumFiles:
    """Test spectrum output."""

    def test_write_spectrum(self, two_level_trace, tmp_path):
        """Test the CSV table and JSON sidecar."""
        spectrum = dft(two_level_trace)
        csv_path, json_path = write_spectrum(
            spectrum, tmp_path / "s.csv", tmp_path / "s.json"
        )
        lines = csv_path.read_text().splitlines()
        assert lines[0] == ",".join(SPECTRUM_HEADER)
        assert len(lines) == spectrum.num_channels + 1
        sidecar = json.loads(json_path.read_text())
        assert sidecar["h0"] == pytest.approx(0.5)
        assert "omega" in sidecar["units"]


@pytest.mark.unit
class TestRecords:
    """Test tabular campaign rows."""

    def test_format_cell(self):
        """Test cells for None, lists and floats."""
        assert format_cell(None) == ""
        assert format_cell(["a", "b"]) == "a;b"
        assert format_cell(0.1) == "0.1"
        assert format_cell(np.float64(0.25)) == "0.25"
        assert format_cell(3) == "3"

    def test_append_then_read(self, tmp_path):
        """Test appended rows share one header."""
        path = tmp_path / "rows.csv"
        append_record_csv({"a": 1, "b": None}, ("a", "b"), path)
        append_record_csv({"a": 2, "b": [1, 2]}, ("a", "b"), path)
        rows = read_records_csv(path)
        assert rows == [{"a": "1", "b": ""}, {"a": "2", "b": "1;2"}]

    def test_write_replaces(self, tmp_path):
        """Test writing rows replaces earlier content."""
        path = tmp_path / "rows.csv"
        append_record_csv({"a": 1}, ("a",), path)
        write_records_csv([{"a": 5}], ("a",), path)
        assert read_records_csv(path) == [{"a": "5"}]

    def test_read_missing(self, tmp_path):
        """Test a missing file reads as no rows."""
        assert read_records_csv(tmp_path / "none.csv") == []


@pytest.mark.unit
class TestManifest:
    """Test run manifests."""

    def test_data_hash_order_independent(self):
        """Test key order does not change the hash."""
        assert compute_data_hash({"a": 1, "b": 2}) == compute_data_hash(
            {"b": 2, "a": 1}
        )
        assert compute_data_hash({"a": 1}) != compute_data_hash({"a": 2})

    @freeze_time("2024-01-15 10:30:00")
    def test_timestamp(self):
        """Test timestamps use local wall time."""
        assert get_current_timestamp() == "2024-01-15 10:30:00"

    @freeze_time("2024-01-15 10:30:00")
    def test_write_and_load(self, tmp_path):
        """Test the manifest records inputs, outputs and version."""
        output = tmp_path / "out.txt"
        output.write_text("data")
        manifest = RunManifest(command="simulate", seed=5, parameters={"ne": 64})
        manifest.add_output(output)
        path = manifest.write(tmp_path / "run.manifest.json")

        data = load_manifest(path)
        assert data["command"] == "simulate"
        assert data["seed"] == 5
        assert data["version"] == __version__
        assert data["created"] == "2024-01-15 10:30:00"
        assert data["outputs"] == [
            {"path": str(output), "sha256": compute_file_hash(output)}
        ]
        assert "_started" not in data
        assert data["duration_s"] >= 0.0

    def test_load_missing_or_broken(self, tmp_path):
        """Test unreadable manifests load as None."""
        assert load_manifest(tmp_path / "none.json") is None
        broken = tmp_path / "broken.json"
        broken.write_text("{")
        assert load_manifest(broken) is None

    def test_trace_file_hash_changes_with_content(self, tmp_path):
        """Test the file hash follows the bytes."""
        a = write_trace(RabiTrace([0.0, 1.0], [1.0, 0.0]), tmp_path / "a.csv")
        b = write_trace(RabiTrace([0.0, 1.0], [1.0, 0.5]), tmp_path / "b.csv")
        assert compute_file_hash(a) != compute_file_hash(b)
