"""Tests for the DFT, phase matching and the third-peak test."""

import logging
import math

import numpy as np
import pytest

from qconfine.core import QConfineError, analytic_peaks
from qconfine.simulate import RabiTrace, SamplingPlan, family, ideal_trace, resample
from qconfine.spectral import (
    FLAG_PRIMARY_AT_EDGE,
    TRIAL_SATURATION,
    NonUniformSampling,
    TooShort,
    dft,
    look_elsewhere_sigma,
    min_window,
    peak_stats,
    phase_match,
    scan_trial_function,
    third_peak_margin,
    third_peak_test,
    transition_channels,
    trial_function,
)


@pytest.fixture
def alternating():
    """Eight samples toggling 1, 0: all power at DC and Nyquist."""
    return RabiTrace(np.arange(8.0), [1.0, 0.0] * 4)


@pytest.mark.unit
class TestDFT:
    """Test the normalised one-sided transform."""

    def test_constant_trace(self):
        """Test a flat record has only a DC component."""
        spectrum = dft(RabiTrace(np.arange(16.0), np.full(16, 0.7)))
        assert spectrum.primary_dc == pytest.approx(0.7)
        np.testing.assert_allclose(spectrum.amps[1:], 0.0, atol=1e-15)

    def test_two_level_peaks(self, two_level_trace):
        """Test a matched qubit record gives h0 = 1/2 and h01 = 1/4 at omega = 1."""
        spectrum = dft(two_level_trace)
        omega_p, h01 = spectrum.primary_peak
        assert spectrum.num_channels == 301
        assert spectrum.resolution == pytest.approx(1.0 / 30.0)
        assert spectrum.primary_index == 30
        assert omega_p == pytest.approx(1.0)
        assert spectrum.primary_dc == pytest.approx(0.5)
        assert h01 == pytest.approx(0.25)
        assert spectrum.noise_sd < 1e-12

    def test_too_short(self):
        """Test fewer than four samples raise."""
        with pytest.raises(TooShort):
            dft(RabiTrace([0.0, 1.0, 2.0], [1.0, 0.5, 0.0]))
        assert issubclass(TooShort, QConfineError)

    def test_non_uniform(self):
        """Test uneven sample times raise."""
        trace = RabiTrace([0.0, 1.0, 2.0, 4.0, 5.0], [1.0, 0.5, 0.0, 0.5, 1.0])
        with pytest.raises(NonUniformSampling):
            dft(trace)

    def test_negative_guard(self, two_level_trace):
        """Test the guard width cannot be negative."""
        with pytest.raises(ValueError):
            dft(two_level_trace, guard=-1)

    def test_primary_at_edge_flag(self, alternating, caplog):
        """Test a Nyquist primary is flagged and logged."""
        with caplog.at_level(logging.WARNING, logger="qconfine"):
            spectrum = dft(alternating)
        assert spectrum.primary_index == spectrum.num_channels - 1
        assert FLAG_PRIMARY_AT_EDGE in spectrum.flags
        assert "last channel" in caplog.text

    def test_excluded_mask(self, two_level_trace):
        """Test guards cover DC and the primary peak neighbourhood."""
        mask = dft(two_level_trace, guard=2).excluded_mask()
        assert list(np.flatnonzero(mask)) == [0, 1, 2, 28, 29, 30, 31, 32]

    @pytest.mark.parametrize("offset, count", [(0.4, 1), (2.0, 2)])
    def test_resolution(self, tone_trace, offset, count):
        """Test tones closer than one channel merge and two channels apart resolve."""
        spectrum = dft(tone_trace([(100, 0.2), (100 + offset, 0.2)], noise=1e-6))
        amps = spectrum.amps
        peaks = [
            j
            for j in range(95, 106)
            if amps[j] > 0.01 and amps[j] > amps[j - 1] and amps[j] > amps[j + 1]
        ]
        assert len(peaks) == count
        assert peaks[0] == 100

    def test_to_dict(self, two_level_trace):

        """Test the summary carries peaks and noise statistics."""
        data = dft(two_level_trace).to_dict()
        assert data["h0"] == pytest.approx(0.5)
        assert data["omega_p"] == pytest.approx(1.0)
        assert data["num_samples"] == 600
        assert data["flags"] == []


@pytest.mark.unit
class TestPhaseMatching:
    """Test trial-function driven truncation."""

    @pytest.fixture
    def overlong_trace(self, two_level):
        """A record half a period past a whole number of periods."""
        plan = SamplingPlan(
            dt=2.0 * math.pi / 20, num_samples=610, ensemble_size=0
        )
        return ideal_trace(two_level, plan)

    def test_trial_function_saturates_when_matched(self, two_level_trace):
        """Test a whole-period record gives a saturated trial value."""
        assert trial_function(dft(two_level_trace)) == TRIAL_SATURATION

    def test_trial_function_finite_when_mismatched(self, overlong_trace):
        """Test a record ending mid-period leaks into neighbouring channels."""
        assert trial_function(dft(overlong_trace)) < 10.0

    def test_min_window(self, two_level_trace):
        """Test the shortest window covers four periods."""
        assert min_window(two_level_trace) == 80
        assert min_window(two_level_trace, min_periods=2.0) == 40

    def test_scan_range(self, two_level_trace):
        """Test only prefixes within the last period are scored."""
        lengths, scores = scan_trial_function(two_level_trace)
        assert lengths[0] == 580
        assert lengths[-1] == 600
        assert scores.shape == lengths.shape

    def test_phase_match_keeps_longest_whole_window(self, overlong_trace):
        """Test the longest whole-period prefix wins ties."""
        matched = phase_match(overlong_trace)
        assert len(matched) == 600
        assert dft(matched).primary_peak[1] == pytest.approx(0.25)

    def test_scan_starts_at_minimal_window(self, two_level):
        """Test a record barely past the window is not scanned below it."""
        plan = SamplingPlan(dt=2.0 * math.pi / 20, num_samples=100, ensemble_size=0)
        lengths, _ = scan_trial_function(ideal_trace(two_level, plan))
        assert lengths[0] == 80
        assert lengths[-1] == 100

    @pytest.mark.parametrize("ensemble_size", [0, 2**16])
    def test_leaky_record_keeps_its_length(self, ensemble_size):
        """Test leakage beats do not pull a leaky record down to the minimal window."""
        hamiltonian = family("H4", 0.02)
        plan = SamplingPlan.for_hamiltonian(hamiltonian, cycles=30, ensemble_size=0)
        trace = ideal_trace(hamiltonian, plan)
        if ensemble_size:
            trace = resample(trace, ensemble_size, seed=5)
        matched = phase_match(trace)
        assert len(trace) == 600
        assert len(matched) >= 29 * 20
        assert trial_function(dft(matched)) >= trial_function(dft(trace))

    def test_phase_match_too_short(self, two_level):
        """Test a record shorter than the minimal window raises."""
        plan = SamplingPlan(dt=2.0 * math.pi / 20, num_samples=40, ensemble_size=0)
        with pytest.raises(TooShort):
            phase_match(ideal_trace(two_level, plan))


@pytest.mark.unit
class TestPeakStats:
    """Test peak and noise statistics."""

    def test_values(self, two_level_trace):
        """Test the statistics mirror the spectrum."""
        stats = peak_stats(dft(two_level_trace))
        assert stats.h0 == pytest.approx(0.5)
        assert stats.h01 == pytest.approx(0.25)
        assert stats.delta_h >= 0.0

    def test_too_few_channels(self, alternating):
        """Test fewer than eight channels raise."""
        with pytest.raises(TooShort):
            peak_stats(dft(alternating))

    def test_noise_floor_tracks_noise(self, tone_trace):
        """Test the noise floor scales with the injected noise."""
        quiet = dft(tone_trace([(100, 0.5)], noise=1e-4))
        loud = dft(tone_trace([(100, 0.5)], noise=1e-2))
        assert loud.noise_sd > 10.0 * quiet.noise_sd
        assert loud.noise_mean > 10.0 * quiet.noise_mean

    def test_noise_floor_scales_with_ensemble(self):
        """Test delta_h * sqrt(N_e) holds steady over a 16-fold range of ensembles."""
        hamiltonian = family("Ha")
        plan = SamplingPlan.for_hamiltonian(hamiltonian, ensemble_size=0)
        ideal = ideal_trace(hamiltonian, plan)
        scaled = []
        for ensemble_size in (256, 1024, 4096):
            deltas = [
                dft(phase_match(resample(ideal, ensemble_size, seed))).noise_sd
                for seed in range(5)
            ]
            scaled.append(np.mean(deltas) * math.sqrt(ensemble_size))
        assert max(scaled) / min(scaled) < 1.5



@pytest.mark.unit
class TestThirdPeak:
    """Test the search for leakage peaks beyond the qubit pair."""

    def test_transition_channels(self, tone_trace):
        """Test frequencies map to channels and past-Nyquist ones drop."""
        spectrum = dft(tone_trace([(100, 0.5)]))
        step = spectrum.resolution
        channels = transition_channels(spectrum, [230 * step, 230.2 * step, 1e6])
        assert list(channels) == [230]

    def test_look_elsewhere_sigma(self):
        """Test the blind threshold grows with the search width and floors at 3."""
        assert look_elsewhere_sigma(0) == 3.0
        assert look_elsewhere_sigma(10) > 3.0
        assert look_elsewhere_sigma(10**6) > look_elsewhere_sigma(10)

    def test_candidate_detects_leakage_peak(self, tone_trace):
        """Test a peak at a known transition frequency is found."""
        spectrum = dft(tone_trace([(100, 0.5), (230, 0.05)]))
        omega = 230 * spectrum.resolution
        assert third_peak_test(spectrum, [omega])
        assert third_peak_margin(spectrum, [omega]) > 0.02

    def test_candidate_elsewhere_not_detected(self, tone_trace):
        """Test a quiet candidate channel fails when the peak lies elsewhere."""
        spectrum = dft(tone_trace([(100, 0.5), (230, 0.05)]))
        assert not third_peak_test(spectrum, [400 * spectrum.resolution])

    def test_blind_detects_leakage_peak(self, tone_trace):
        """Test the blind search finds a strong extra peak."""
        assert third_peak_test(dft(tone_trace([(100, 0.5), (230, 0.05)])))

    def test_blind_rejects_noise(self, tone_trace):
        """Test pure noise does not pass the blind search."""
        spectrum = dft(tone_trace([(100, 0.5)]))
        assert not third_peak_test(spectrum, false_alarm=1e-6)

    def test_primary_is_never_a_candidate(self, tone_trace):
        """Test candidates inside the guarded regions are ignored."""
        spectrum = dft(tone_trace([(100, 0.5)]))
        margin = third_peak_margin(spectrum, [100 * spectrum.resolution, 0.0])
        assert margin == -math.inf

    def test_leaky_record_shows_third_peak(self):
        """Test a full-length leaky record exposes its leakage lines."""
        hamiltonian = family("H4", 0.02)
        plan = SamplingPlan.for_hamiltonian(hamiltonian, cycles=30, ensemble_size=0)
        spectrum = dft(phase_match(ideal_trace(hamiltonian, plan)))
        omegas = [t.omega for t in analytic_peaks(hamiltonian).leakage_transitions()]
        free = np.setdiff1d(
            transition_channels(spectrum, omegas),
            np.flatnonzero(spectrum.excluded_mask()),
        )
        assert free.size > 0
        assert third_peak_margin(spectrum, omegas) > 0.0

    @pytest.mark.slow
    def test_blind_false_alarm_rate(self):
        """Test the blind search rarely fires on a system with no leakage."""
        hamiltonian = family("Ha")
        plan = SamplingPlan.for_hamiltonian(hamiltonian, ensemble_size=0)
        ideal = ideal_trace(hamiltonian, plan)
        alarms = sum(
            third_peak_test(dft(phase_match(resample(ideal, 1024, seed))))
            for seed in range(500)
        )
        assert alarms <= 5
