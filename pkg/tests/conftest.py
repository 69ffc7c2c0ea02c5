"""Shared fixtures."""

import math

import numpy as np
import pytest

import qconfine.config as config_module
from qconfine.config import Config
from qconfine.core import HermitianOperator
from qconfine.simulate import RabiTrace, SamplingPlan, ideal_trace, make_rng


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Point the user config at a temporary directory for every test."""
    config_dir = tmp_path / "qconfine-config"
    monkeypatch.setattr(Config, "_get_config_dir", lambda self: config_dir)
    monkeypatch.setattr(config_module, "_config_instance", None)
    monkeypatch.delenv("QCONFINE_SEED", raising=False)
    yield config_dir


@pytest.fixture
def two_level():
    """Resonant qubit with Rabi frequency 1: p(t) = cos^2(t / 2)."""
    return HermitianOperator.from_rows([[0.0, 0.5], [0.5, 0.0]])


@pytest.fixture
def two_level_trace(two_level):
    """Noiseless 30-period record at 20 samples per period."""
    plan = SamplingPlan.for_hamiltonian(two_level, cycles=30, ensemble_size=0)
    return ideal_trace(two_level, plan)


@pytest.fixture
def uniform_four_level():
    """Four levels with |0> spread evenly over the eigenbasis."""
    fourier = np.fft.fft(np.eye(4)) / 2.0
    matrix = fourier @ np.diag([0.0, 1.0, 2.0, 3.0]) @ fourier.conj().T
    return HermitianOperator((matrix + matrix.conj().T) / 2.0)


@pytest.fixture
def tone_trace():
    """Build a unit-step record with tones on exact DFT channels plus white noise."""

    def build(tones, num_samples=1000, noise=1e-3, seed=3):
        times = np.arange(num_samples, dtype=float)
        signal = np.full(num_samples, 0.5)
        for channel, amplitude in tones:
            signal += amplitude * np.cos(2.0 * math.pi * channel * times / num_samples)
        rng = make_rng(seed)
        signal += rng.normal(scale=noise, size=num_samples)
        return RabiTrace(times, signal)

    return build
