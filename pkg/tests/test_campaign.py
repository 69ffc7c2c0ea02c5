"""Tests for Monte-Carlo campaigns."""

import math
from unittest.mock import patch

import numpy as np
import pytest

from qconfine import campaign as campaign_module
from qconfine.campaign import (
    METHOD_CONFINEMENT,
    CampaignError,
    EfficiencyPoint,
    EfficiencySettings,
    TrialRecord,
    TrialSettings,
    ValidationStats,
    convergence_sweep,
    decoherence_sweep,
    distance_study,
    efficiency_curve,
    run_parallel,
    summarize_convergence,
    validation_campaign,
)
from qconfine.core import exact_leakage
from qconfine.decoherence import DecoherenceConfig
from qconfine.formats import format_cell
from qconfine.simulate import UnknownFamily, family


def make_record(trial=0, ensemble_size=64, eps_high=1e-3, distance=1e-4, error=1e-4):
    return TrialRecord(
        trial=trial,
        seed=trial + 100,
        dim=3,
        ensemble_size=ensemble_size,
        eps_exact=1e-3,
        eps_analytic=1e-3,
        eps_low=5e-4,
        eps_high=eps_high,
        d_eps_low=1e-4,
        d_eps_high=error,
        distance=distance,
    )


@pytest.mark.unit
class TestRunParallel:
    """Test the job runner."""

    def test_serial(self):
        """Test results and callbacks arrive in job order in-process."""
        seen = []
        results = run_parallel(lambda x: x * x, [1, 2, 3], on_result=seen.append)
        assert results == [1, 4, 9]
        assert seen == [1, 4, 9]

    def test_failure_keeps_partial(self):
        """Test a failing job raises with the results gathered so far."""

        def fn(x):
            if x == 3:
                raise RuntimeError("boom")
            return x

        with pytest.raises(CampaignError, match="boom") as excinfo:
            run_parallel(fn, [1, 2, 3, 4])
        assert excinfo.value.partial == [1, 2]


@pytest.mark.unit
class TestTrialRecord:
    """Test trial outcomes."""

    def test_success(self):
        """Test success means d - 3 delta_d <= 0."""
        assert make_record(distance=3e-4, error=1e-4).success
        assert not make_record(distance=4e-4, error=1e-4).success
        assert not make_record(distance=None).success
        assert not make_record(error=None).success

    def test_row_form(self):
        """Test rows carry success as 0/1 and read back from CSV cells."""
        record = TrialRecord(**{**make_record().__dict__, "flags": ("a", "b")})
        row = record.to_row()
        assert row["success"] == 1
        cells = {key: format_cell(value) for key, value in row.items()}
        assert cells["flags"] == "a;b"
        assert TrialRecord.from_row(cells) == record

    def test_row_with_undefined_bound(self):
        """Test blank cells read back as None."""
        cells = {
            key: format_cell(value)
            for key, value in make_record(eps_high=None, error=None).to_row().items()
        }
        record = TrialRecord.from_row(cells)
        assert record.eps_high is None
        assert record.d_eps_high is None
        assert record.flags == ()


@pytest.mark.unit
class TestValidationStats:
    """Test distance statistics."""

    def test_summary(self):
        """Test ratio, coverage and histogram totals."""
        stats = ValidationStats(
            [
                make_record(0, distance=1e-4, error=1e-4),
                make_record(1, distance=2e-4, error=1e-4),
                make_record(2, distance=1e-3, error=1e-4),
                make_record(3, distance=None, error=None),
            ]
        )
        assert stats.ratio == pytest.approx(0.5)
        assert stats.coverage_radius == pytest.approx(3e-4)
        assert stats.coverage == pytest.approx(0.5)

        summary = stats.summary(bins=5)
        assert summary["trials"] == 4
        assert summary["undefined"] == 1
        assert sum(summary["histogram"]["counts"]) == 3
        assert len(summary["histogram"]["edges"]) == 6

    def test_empty(self):
        """Test an empty campaign reports zeros."""
        stats = ValidationStats([])
        assert stats.ratio == 0.0
        assert math.isnan(stats.mean_error)
        assert stats.summary(bins=4)["histogram"]["counts"] == [0, 0, 0, 0]


@pytest.mark.integration
class TestValidationCampaign:
    """Test random-Hamiltonian campaigns."""

    @pytest.fixture
    def short(self):
        return TrialSettings(cycles=20)

    def test_records(self, short):
        """Test one record per trial, each against its own Hamiltonian."""
        stats = validation_campaign(4, 1024, short, seed=7)
        assert [r.trial for r in stats.records] == [0, 1, 2, 3]
        for record in stats.records:
            assert 2 <= record.dim <= 10
            assert record.ensemble_size == 1024
            assert record.eps_low >= 0.0

    def test_repeatable(self, short):
        """Test the same seed reproduces every record."""
        first = validation_campaign(3, 256, short, seed=2)
        second = validation_campaign(3, 256, short, seed=2)
        assert first.records == second.records

    def test_resume_skips_completed(self, short):
        """Test completed trials are kept and not rerun."""
        full = validation_campaign(4, 256, short, seed=5)
        fresh = []
        resumed = validation_campaign(
            4, 256, short, seed=5, completed=full.records[:2], on_record=fresh.append
        )
        assert sorted(r.trial for r in fresh) == [2, 3]
        assert resumed.records == full.records

    @pytest.mark.slow
    def test_workers_match_serial(self, short):
        """Test a process pool gives the same records as one process."""
        serial = validation_campaign(4, 256, short, seed=11)
        pooled = validation_campaign(4, 256, short, seed=11, workers=2)
        assert pooled.records == serial.records

    def test_failure_reports_partial(self, short):
        """Test a failing trial stops the campaign and keeps finished ones."""
        completed = validation_campaign(1, 256, short, seed=3).records
        with patch.object(
            campaign_module, "analyse_trace", side_effect=RuntimeError("bad trace")
        ):
            with pytest.raises(CampaignError) as excinfo:
                validation_campaign(3, 256, short, seed=3, completed=completed)
        assert [r.trial for r in excinfo.value.partial] == [0]

    @pytest.mark.slow
    def test_bounds_agree_within_three_errors(self):
        """Test 99% of random systems land within 3 delta_d of the analytic bound."""
        stats = validation_campaign(500, 1024, TrialSettings(), seed=0)
        assert stats.summary()["undefined"] == 0
        assert stats.ratio >= 0.99

    @pytest.mark.slow
    def test_unleaky_system_covered(self):
        """Test 3 * mean(delta_d) covers the distances of a system with no leakage."""
        stats = distance_study(family("Ha"), 500, 1024, seed=1)
        assert stats.coverage >= 0.99

    def test_distance_study_fixes_hamiltonian(self, short):

        """Test every trial uses the given system."""
        hamiltonian = family("Hn")
        stats = distance_study(hamiltonian, 3, 4096, short, seed=1)
        assert {r.dim for r in stats.records} == {3}
        assert {r.eps_exact for r in stats.records} == {exact_leakage(hamiltonian)}
        assert len({r.seed for r in stats.records}) == 3


@pytest.mark.unit
class TestConvergence:
    """Test convergence statistics."""

    def test_summarize_groups_by_ensemble(self):
        """Test one point per ensemble size with quartiles."""
        records = [
            make_record(0, 64, eps_high=1e-3),
            make_record(1, 64, eps_high=2e-3),
            make_record(2, 64, eps_high=3e-3),
            make_record(3, 256, eps_high=None, distance=None, error=None),
        ]
        points = summarize_convergence(records)
        assert [p.ensemble_size for p in points] == [64, 256]
        assert points[0].trials == 3
        assert points[0].median_eps_high == pytest.approx(2e-3)
        assert points[0].spread == pytest.approx(1e-3)
        assert points[1].median_eps_high is None
        assert points[1].spread is None

    @pytest.mark.slow
    def test_spread_shrinks(self):
        """Test larger ensembles narrow eps_high around the exact leakage."""
        hamiltonian = family("Hb")
        points, records = convergence_sweep(
            hamiltonian, [2**8, 2**10, 2**14], 50, seed=4
        )
        assert len(records) == 150
        spreads = [p.spread for p in points]
        assert spreads[0] > spreads[1] > spreads[2]
        assert points[2].median_eps_high == pytest.approx(7e-4, abs=2e-4)
        assert points[2].median_eps_high == pytest.approx(
            exact_leakage(hamiltonian), abs=2e-4
        )

    @pytest.mark.slow
    def test_unleaky_system_converges_to_zero(self):
        """Test a system with no leakage gives a vanishing median bound."""
        points, _ = convergence_sweep(family("Ha"), [2**14], 50, seed=4)
        assert points[0].median_eps_high < 2e-4


@pytest.mark.unit
class TestEfficiency:
    """Test efficiency curves."""

    def test_grid(self):
        """Test the doubling grid stops at ne_max."""
        assert EfficiencySettings(ne_min=16, ne_max=100).grid() == [16, 32, 64]

    @pytest.mark.parametrize(
        "kwargs", [{"ne_min": 0}, {"ne_min": 64, "ne_max": 32}, {"n_seeds": 0}]
    )
    def test_invalid_settings(self, kwargs):
        """Test impossible grids are refused."""
        with pytest.raises(ValueError):
            EfficiencySettings(**kwargs)

    def test_unknown_method(self):
        """Test only known criteria are accepted."""
        with pytest.raises(ValueError, match="method"):
            efficiency_curve("H3", [0.01], methods=("guess",))

    def test_unknown_family(self):
        """Test the family is checked before any work starts."""
        with pytest.raises(UnknownFamily):
            efficiency_curve("H42", [0.01])

    def test_completed_points_are_kept(self):
        """Test resumed points are returned without rerunning."""
        done = EfficiencyPoint(0.01, 1e-4, 4096, 8192, index=0)
        with patch.object(campaign_module, "run_efficiency_point") as runner:
            points = efficiency_curve("H3", [0.01], completed=[done])
        runner.assert_not_called()
        assert points == [done]

    def test_unreachable_is_flagged(self):
        """Test a criterion that never holds on the grid is flagged."""
        settings = EfficiencySettings(ne_min=16, ne_max=16, n_seeds=1)
        (point,) = efficiency_curve(
            "H3", [0.005], methods=(METHOD_CONFINEMENT,), settings=settings
        )
        assert point.ne_confinement is None
        assert point.ne_third_peak is None
        assert point.flags == ("confinement_unreachable",)

    def test_point_row_form(self):
        """Test efficiency rows read back from CSV cells."""
        point = EfficiencyPoint(0.02, 4e-4, None, 1024, index=2, flags=("x",))
        cells = {key: format_cell(value) for key, value in point.to_row().items()}
        assert EfficiencyPoint.from_row(cells) == point

    @pytest.mark.slow
    def test_criteria_cross_over_with_level_count(self):
        """Test extra leaky levels favour the confinement criterion."""
        gammas = [0.01, 0.02, 0.04]
        log_ratios = {}
        for name in ("H3", "H4", "H6"):
            points = efficiency_curve(name, gammas, seed=1)
            assert all(p.flags == () for p in points), name
            log_ratios[name] = np.median(
                [math.log2(p.ne_third_peak / p.ne_confinement) for p in points]
            )
            if name == "H6":
                assert all(p.ne_confinement < p.ne_third_peak for p in points)
        assert abs(log_ratios["H3"]) <= 1.0
        assert log_ratios["H4"] > log_ratios["H3"]
        assert log_ratios["H6"] > log_ratios["H3"]


@pytest.mark.unit
class TestDecoherenceSweep:
    """Test estimates on decohered records."""

    @pytest.fixture
    def weak_noise(self):
        return DecoherenceConfig(
            theta=math.pi / 2, gap=1.0, gamma_x=2.5e-4, gamma_y=2.5e-4, gamma_z=2.5e-4
        )

    def test_resolution_factor_checked(self, weak_noise):
        """Test the record cannot exceed the allowed observation time."""
        with pytest.raises(ValueError):
            decoherence_sweep(weak_noise, [0.05], resolution_factor=0.5)

    @pytest.mark.slow
    def test_within_target(self, weak_noise):
        """Test leakage mimicked by decoherence stays below each target."""
        points = decoherence_sweep(weak_noise, [0.02, 0.05, 0.1])
        assert [p.zeta for p in points] == [0.02, 0.05, 0.1]
        for point in points:
            assert point.within_target
            assert point.t_ob <= point.t_ob_max
            assert point.to_row()["within_target"] == 1
        highs = np.array([p.eps_high for p in points])
        assert np.all(np.diff(highs) > 0.0)
