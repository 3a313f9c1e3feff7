"""
Tests for single-photon source characterization.
"""

import logging

import numpy as np
import pytest

from models import ModelKind, ModelSpec
from services.fit_engine import evaluate_model
from services.histogram_simulator import RecaptureSpec, SourceSpec, expected_histogram, simulate_histogram
from services.photon_stats import (
    BudgetElement,
    CoincidenceHistogram,
    DecayTrace,
    SourceReport,
    Spectrum,
    build_source_report,
    efficiency_budget,
    extraction_efficiency,
    fit_lifetime,
    fit_saturation,
    g2_zero,
    purcell_factor,
    q_factor,
)
from utils.errors import ArgumentError, DegenerateHistogramError, DomainError
from utils.measurements import Measurement

REP_RATE_HZ = 79.3e6


def _decay_trace(tau_ps: float, peak: float = 1000.0, offset: float = 5.0) -> DecayTrace:
    """Linear rise to the peak at 1000 ps, then a single exponential."""
    t = np.arange(0.0, 10000.0, 16.0)
    t0 = 1008.0
    counts = np.where(t < t0, offset + peak * t / t0, offset + peak * np.exp(-(t - t0) / tau_ps))
    return DecayTrace(t, counts, "synthetic")


def _expected(source: SourceSpec) -> CoincidenceHistogram:
    delay, counts = expected_histogram(source, total_pairs=1e5)
    return CoincidenceHistogram(delay, counts, 1e9 / REP_RATE_HZ, 0.1)


def _budget(transmission: float = 0.027, rel_err: float = 0.091):
    return efficiency_budget([("setup", transmission, rel_err)])


class TestLifetime:
    def test_noiseless_decay(self) -> None:
        result = fit_lifetime(_decay_trace(530.0))

        assert result.tau_ps.value == pytest.approx(530.0, rel=1e-4)
        assert result.window_ps[0] == pytest.approx(1008.0 + 32.0)
        assert set(result.to_dict()) == {"tau_ps", "window_ps", "fit"}

    def test_poisson_decay(self, rng: np.random.Generator) -> None:
        trace = _decay_trace(1120.0, peak=3000.0)
        noisy = DecayTrace(trace.time_ps, rng.poisson(trace.counts).astype(float))
        result = fit_lifetime(noisy)

        assert 0 < result.tau_ps.sigma < 50.0
        assert result.tau_ps.value == pytest.approx(1120.0, abs=4 * result.tau_ps.sigma)

    def test_window_over_peak_warns(self, caplog: pytest.LogCaptureFixture) -> None:
        with caplog.at_level(logging.WARNING):
            fit_lifetime(_decay_trace(530.0), fit_window=(500.0, 9000.0))
        assert "peak" in caplog.text

    def test_reversed_window(self) -> None:
        with pytest.raises(ArgumentError):
            fit_lifetime(_decay_trace(530.0), fit_window=(5000.0, 2000.0))

    def test_trace_validation(self) -> None:
        with pytest.raises(ArgumentError):
            DecayTrace(np.array([0.0, 16.0, 8.0]), np.ones(3))
        with pytest.raises(ArgumentError):
            DecayTrace(np.arange(3.0), np.array([1.0, -1.0, 2.0]))


def test_purcell_factor() -> None:
    purcell = purcell_factor(Measurement(1120.0, 4.0), Measurement(530.0, 6.0))

    assert purcell.value == pytest.approx(2.1132, abs=1e-4)
    assert purcell.sigma == pytest.approx(0.0251, abs=1e-4)
    with pytest.raises(DomainError):
        purcell_factor(Measurement(1120.0, 4.0), Measurement(0.0))


def test_q_factor_from_lorentzian() -> None:
    wavelength = np.arange(913.0, 917.0, 0.01)
    counts = evaluate_model(ModelSpec(ModelKind.LORENTZIAN_1D), np.array([1000.0, 915.01, 0.3, 20.0]), wavelength)
    result = q_factor(Spectrum(wavelength, counts, "nm"))

    assert result.q.value == pytest.approx(915.01 / 0.6, rel=1e-5)
    assert result.center == pytest.approx(915.01)
    assert result.unit == "nm"


def test_q_factor_window(rng: np.random.Generator) -> None:
    wavelength = np.arange(910.0, 920.0, 0.01)
    counts = evaluate_model(ModelSpec(ModelKind.LORENTZIAN_1D), np.array([1000.0, 915.01, 0.3, 20.0]), wavelength)
    noisy = rng.poisson(counts).astype(float)
    result = q_factor(Spectrum(wavelength, noisy), window=(913.0, 917.0))

    assert result.q.sigma > 0
    assert result.q.value == pytest.approx(1525.0, abs=5 * result.q.sigma)


def test_spectrum_unit_must_be_known() -> None:
    with pytest.raises(ArgumentError):
        Spectrum(np.arange(3.0), np.ones(3), unit="cm-1")


def test_saturation_fit() -> None:
    powers = np.linspace(0.1, 5.0, 12)
    counts = evaluate_model(ModelSpec(ModelKind.SATURATION_CURVE), np.array([1.68e6, 1.0]), powers)
    result = fit_saturation(powers, counts)

    assert result.saturated_counts_per_s.value == pytest.approx(1.68e6, rel=1e-6)
    assert result.saturation_power.value == pytest.approx(1.0, rel=1e-6)


def test_saturation_needs_three_powers() -> None:
    with pytest.raises(ArgumentError):
        fit_saturation([1.0, 1.0, 2.0], [10.0, 11.0, 15.0])


class TestG2:
    def test_expected_histogram_gives_target(self) -> None:
        result = g2_zero(_expected(SourceSpec(0.2)))

        assert result.g2 == pytest.approx(0.2, rel=1e-6)
        assert len(result.side_areas) == 4
        assert result.integration_halfwidth_ns == pytest.approx(1e9 / REP_RATE_HZ / 4.0)

    def test_simulated_histogram_within_uncertainty(self) -> None:
        side_area = 2050.0
        hist = simulate_histogram(SourceSpec(0.205), total_pairs=side_area * (8 + 0.205), seed=17)
        result = g2_zero(hist)

        assert 0.005 < result.sigma_g2 < 0.02
        assert result.g2 == pytest.approx(0.205, abs=4 * result.sigma_g2)

    @pytest.mark.slow
    def test_closed_loop_over_seeds(self) -> None:
        """Simulate-then-estimate recovers the target on average."""
        side_area = 2050.0
        results = [
            g2_zero(simulate_histogram(SourceSpec(0.205), total_pairs=side_area * (8 + 0.205), seed=seed))
            for seed in range(100)
        ]
        estimates = np.array([r.g2 for r in results])
        sigmas = np.array([r.sigma_g2 for r in results])

        assert abs(estimates.mean() - 0.205) < 3 * sigmas.mean() / np.sqrt(len(results))
        assert np.count_nonzero(np.abs(estimates - 0.205) <= 3 * sigmas) >= 95

    def test_recapture_dip(self) -> None:
        hist = _expected(SourceSpec(0.2, RecaptureSpec(delay_ns=1.5, fraction=0.8)))
        result = g2_zero(hist, dip_halfwidth_ns=0.5)

        assert result.g2 == pytest.approx(0.2, rel=1e-4)
        assert result.dip_g2.value == pytest.approx(0.04, abs=0.01)
        assert result.to_dict()["dip_g2"]["value"] == result.dip_g2.value

    def test_empty_side_peaks(self) -> None:
        delay, counts = expected_histogram(SourceSpec(0.2))
        hist = CoincidenceHistogram(delay, np.zeros_like(counts), 1e9 / REP_RATE_HZ, 0.1)
        with pytest.raises(DegenerateHistogramError):
            g2_zero(hist)

    def test_bad_windows(self) -> None:
        hist = _expected(SourceSpec(0.2))
        with pytest.raises(ArgumentError):
            g2_zero(hist, integration_halfwidth_ns=7.0)
        with pytest.raises(ArgumentError):
            g2_zero(hist, side_peaks_per_side=5)
        with pytest.raises(ArgumentError):
            g2_zero(hist, dip_halfwidth_ns=4.0)

    def test_histogram_must_cover_three_periods(self) -> None:
        delay = np.arange(-20.0, 20.0, 0.1)
        with pytest.raises(ArgumentError):
            CoincidenceHistogram(delay, np.ones_like(delay), 12.61, 0.1)


class TestEfficiency:
    def test_detection_budget(self, detection_budget_elements) -> None:
        budget = efficiency_budget(detection_budget_elements)

        assert budget.transmission == pytest.approx(0.027452, abs=5e-6)
        assert budget.rel_err == pytest.approx(0.0911, abs=5e-4)
        assert budget.overall.value == pytest.approx(0.027, abs=5e-4)
        assert [e.name for e in budget.elements][-1] == "single-photon detector"

    def test_budget_input_forms(self) -> None:
        from_tuple = efficiency_budget([("lens", 0.9, 0.03)])
        from_dict = efficiency_budget([{"name": "lens", "transmission": 0.9, "rel_err": 0.03}])
        from_element = efficiency_budget([BudgetElement("lens", 0.9, 0.03)])

        assert from_tuple == from_dict == from_element
        with pytest.raises(ArgumentError):
            efficiency_budget([])
        with pytest.raises(ArgumentError):
            efficiency_budget([{"name": "lens"}])
        with pytest.raises(ArgumentError):
            BudgetElement("lens", 1.2)

    @pytest.mark.parametrize(
        "detected, g2, expected",
        [
            (1_679_000.0, 0.205, 0.6508),
            (1_657_000.0, 0.144, 0.6765),
        ],
    )
    def test_extraction_efficiency(self, detected: float, g2: float, expected: float) -> None:
        eta = extraction_efficiency(detected, REP_RATE_HZ, _budget(), Measurement(g2, 0.01))

        assert eta.value == pytest.approx(expected, abs=1e-4)
        assert 0.05 < eta.sigma < 0.07

    def test_unit_efficiency(self) -> None:
        eta = extraction_efficiency(REP_RATE_HZ, REP_RATE_HZ, efficiency_budget([("ideal", 1.0, 0.0)]), Measurement(0.0))
        assert eta.value == 1.0

    def test_multiphoton_correction_lowers_efficiency(self) -> None:
        low = extraction_efficiency(1.6e6, REP_RATE_HZ, _budget(), Measurement(0.1))
        high = extraction_efficiency(1.6e6, REP_RATE_HZ, _budget(), Measurement(0.3))
        assert high.value < low.value

    def test_invalid_inputs(self) -> None:
        with pytest.raises(DomainError):
            extraction_efficiency(0.0, REP_RATE_HZ, _budget(), Measurement(0.2))
        with pytest.raises(DomainError):
            extraction_efficiency(1e6, REP_RATE_HZ, _budget(), Measurement(-0.1))


class TestSourceReport:
    def test_report_from_all_analyses(self) -> None:
        cavity = fit_lifetime(_decay_trace(530.0))
        reference = fit_lifetime(_decay_trace(1120.0))
        g2 = g2_zero(_expected(SourceSpec(0.205)))
        report = build_source_report(
            lifetime_cavity=cavity,
            lifetime_reference=reference,
            g2=g2,
            budget=_budget(),
            detected_counts_per_s=1_679_000.0,
            pump_power_density_w_cm2=24.0,
        )

        assert report.purcell.value == pytest.approx(1120.0 / 530.0, rel=1e-3)
        assert report.extraction_efficiency.value == pytest.approx(0.6508, abs=1e-3)
        assert report.to_dict()["pump_power_density_w_cm2"] == 24.0

    def test_saturated_rate_is_used_without_explicit_rate(self) -> None:
        powers = np.linspace(0.1, 5.0, 12)
        counts = evaluate_model(ModelSpec(ModelKind.SATURATION_CURVE), np.array([1.679e6, 1.0]), powers)
        g2 = g2_zero(_expected(SourceSpec(0.205)))
        report = build_source_report(g2=g2, saturation=fit_saturation(powers, counts), budget=_budget())

        assert report.extraction_efficiency.value == pytest.approx(0.6508, abs=1e-3)
        assert any("saturated" in note for note in report.notes)

    def test_missing_inputs_leave_fields_empty(self) -> None:
        report = build_source_report(budget=_budget())

        assert report.extraction_efficiency is None
        assert report.purcell is None
        assert report.notes

    def test_unphysical_efficiency_is_rejected(self) -> None:
        with pytest.raises(DomainError):
            SourceReport(extraction_efficiency=Measurement(1.3, 0.1))
