"""
Photon Statistics Service - Single-photon source characterization.

Covers lifetime fits and the Purcell factor, the cavity Q factor, pump
saturation, g2(0) from pulsed coincidence histograms and the extraction
efficiency inferred through a setup transmission budget.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from models.model_registry import ModelKind, ModelSpec
from services.fit_engine import FitOptions, FitResult, fit
from utils.errors import ArgumentError, DegenerateHistogramError, DomainError, FitFailure
from utils.measurements import Measurement, quadrature

logger = logging.getLogger(__name__)

DEFAULT_REP_RATE_HZ = 79.3e6
# bins skipped after the peak before the default lifetime window starts
LIFETIME_WINDOW_SKIP_BINS = 2


def _strictly_increasing(values: np.ndarray) -> bool:
    return values.size < 2 or bool(np.all(np.diff(values) > 0))


def _frozen_array(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class DecayTrace:
    """Time-resolved photoluminescence counts."""
    time_ps: np.ndarray
    counts: np.ndarray
    description: str = ""

    def __post_init__(self):
        time_ps, counts = _frozen_array(self.time_ps), _frozen_array(self.counts)
        if time_ps.ndim != 1 or time_ps.shape != counts.shape or time_ps.size == 0:
            raise ArgumentError("time_ps and counts must be non-empty 1D arrays of equal length")
        if not _strictly_increasing(time_ps):
            raise ArgumentError("time_ps must be strictly increasing")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ArgumentError("counts must be finite and >= 0")
        object.__setattr__(self, "time_ps", time_ps)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Pulsed start-stop coincidences per delay bin."""
    delay_ns: np.ndarray
    counts: np.ndarray
    rep_period_ns: float
    bin_width_ns: float

    def __post_init__(self):
        delay, counts = _frozen_array(self.delay_ns), _frozen_array(self.counts)
        if delay.ndim != 1 or delay.shape != counts.shape or delay.size < 2:
            raise ArgumentError("delay_ns and counts must be 1D arrays of equal length >= 2")
        if not (self.rep_period_ns > 0 and self.bin_width_ns > 0):
            raise ArgumentError("rep_period_ns and bin_width_ns must be > 0")
        if not np.allclose(np.diff(delay), self.bin_width_ns, rtol=1e-6, atol=1e-9):
            raise ArgumentError("histogram bins must be uniform with width bin_width_ns")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ArgumentError("counts must be finite and >= 0")
        span = 3.0 * self.rep_period_ns - self.bin_width_ns
        if delay[0] - 0.5 * self.bin_width_ns > -span or delay[-1] + 0.5 * self.bin_width_ns < span:
            raise ArgumentError(
                f"delay range [{delay[0]:.3g}, {delay[-1]:.3g}] ns must cover +-3 repetition periods"
            )
        object.__setattr__(self, "delay_ns", delay)
        object.__setattr__(self, "counts", counts)

    def area(self, center_ns: float, halfwidth_ns: float) -> float:
        """Total counts in bins whose centers lie within +-halfwidth of center."""
        tolerance = 1e-9 * self.bin_width_ns
        inside = np.abs(self.delay_ns - center_ns) <= halfwidth_ns + tolerance
        return float(np.sum(self.counts[inside]))

    def covers(self, center_ns: float, halfwidth_ns: float) -> bool:
        half_bin = 0.5 * self.bin_width_ns
        return (
            self.delay_ns[0] - half_bin <= center_ns - halfwidth_ns
            and center_ns + halfwidth_ns <= self.delay_ns[-1] + half_bin
        )

    def scaled(self, factor: int) -> "CoincidenceHistogram":
        return CoincidenceHistogram(self.delay_ns, self.counts * factor, self.rep_period_ns, self.bin_width_ns)


@dataclass(frozen=True)
class Spectrum:
    """Counts versus wavelength [nm] or photon energy [eV]."""
    axis: np.ndarray
    counts: np.ndarray
    unit: str = "nm"

    def __post_init__(self):
        axis, counts = _frozen_array(self.axis), _frozen_array(self.counts)
        if axis.ndim != 1 or axis.shape != counts.shape:
            raise ArgumentError("spectrum axis and counts must be 1D of equal length")
        if self.unit not in ("nm", "eV"):
            raise ArgumentError(f"spectrum unit must be 'nm' or 'eV', got {self.unit!r}")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class LifetimeResult:
    tau_ps: Measurement
    fit: FitResult
    window_ps: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return {"tau_ps": self.tau_ps.to_dict(), "window_ps": list(self.window_ps), "fit": self.fit.to_dict()}


@dataclass(frozen=True)
class QFactorResult:
    q: Measurement
    center: float
    hwhm: float
    unit: str
    fit: FitResult

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q.to_dict(),
            "center": self.center,
            "hwhm": self.hwhm,
            "unit": self.unit,
            "fit": self.fit.to_dict(),
        }


@dataclass(frozen=True)
class SaturationResult:
    saturated_counts_per_s: Measurement
    saturation_power: Measurement
    fit: FitResult

    def to_dict(self) -> Dict[str, Any]:
        return {
            "saturated_counts_per_s": self.saturated_counts_per_s.to_dict(),
            "saturation_power": self.saturation_power.to_dict(),
            "fit": self.fit.to_dict(),
        }


@dataclass(frozen=True)
class G2Result:
    """g2(0) with the peak areas it was computed from."""
    g2: float
    sigma_g2: float
    central_area: float
    side_areas: Tuple[float, ...]
    integration_halfwidth_ns: float
    dip_g2: Optional[Measurement] = None

    @property
    def measurement(self) -> Measurement:
        return Measurement(self.g2, self.sigma_g2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "g2": self.g2,
            "sigma_g2": self.sigma_g2,
            "peak_areas": {"central": self.central_area, "side": list(self.side_areas)},
            "integration_halfwidth_ns": self.integration_halfwidth_ns,
            "dip_g2": self.dip_g2.to_dict() if self.dip_g2 else None,
        }


@dataclass(frozen=True)
class BudgetElement:
    """One optical element: transmission in (0, 1] with a relative error."""
    name: str
    transmission: float
    rel_err: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.transmission <= 1.0):
            raise ArgumentError(f"element '{self.name}': transmission must be in (0, 1], got {self.transmission}")
        if not (self.rel_err >= 0.0 and math.isfinite(self.rel_err)):
            raise ArgumentError(f"element '{self.name}': rel_err must be >= 0, got {self.rel_err}")


@dataclass(frozen=True)
class EfficiencyBudget:
    """Ordered transmission elements and their product."""
    elements: Tuple[BudgetElement, ...]
    transmission: float
    rel_err: float

    @property
    def overall(self) -> Measurement:
        return Measurement(self.transmission, self.transmission * self.rel_err)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "elements": [
                {"name": e.name, "transmission": e.transmission, "rel_err": e.rel_err} for e in self.elements
            ],
            "overall": {"transmission": self.transmission, "rel_err": self.rel_err},
        }


@dataclass(frozen=True)
class SourceReport:
    """Everything measured about one source; absent quantities are None."""
    lifetime_cavity_ps: Optional[Measurement] = None
    lifetime_reference_ps: Optional[Measurement] = None
    purcell: Optional[Measurement] = None
    q_factor: Optional[Measurement] = None
    g2_zero: Optional[Measurement] = None
    saturated_counts_per_s: Optional[Measurement] = None
    extraction_efficiency: Optional[Measurement] = None
    budget: Optional[EfficiencyBudget] = None
    pump_power_density_w_cm2: Optional[float] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        eta = self.extraction_efficiency
        if eta is not None and not (0.0 <= eta.value <= 1.0):
            raise DomainError(
                f"extraction efficiency {eta.value:.4g} outside [0, 1]; check the budget and count rate",
                parameter="extraction_efficiency",
            )

    def to_dict(self) -> Dict[str, Any]:
        def m(value: Optional[Measurement]) -> Optional[Dict[str, float]]:
            return value.to_dict() if value is not None else None

        return {
            "lifetime_cavity_ps": m(self.lifetime_cavity_ps),
            "lifetime_reference_ps": m(self.lifetime_reference_ps),
            "purcell": m(self.purcell),
            "q_factor": m(self.q_factor),
            "g2_zero": m(self.g2_zero),
            "saturated_counts_per_s": m(self.saturated_counts_per_s),
            "extraction_efficiency": m(self.extraction_efficiency),
            "budget": self.budget.to_dict() if self.budget else None,
            "pump_power_density_w_cm2": self.pump_power_density_w_cm2,
            "notes": list(self.notes),
        }


def _require_converged(result: FitResult, what: str) -> FitResult:
    if not result.converged:
        raise FitFailure(f"{what} fit did not converge after {result.iterations} iterations", fit=result)
    return result


def fit_lifetime(
    trace: DecayTrace,
    fit_window: Optional[Tuple[float, float]] = None,
    options: Optional[FitOptions] = None,
) -> LifetimeResult:
    """
    Single-exponential lifetime.

    Args:
        trace: Decay trace
        fit_window: (start_ps, end_ps); default from two bins after the
            peak to the end of the trace
        options: Fit options; Poisson weighting by default

    Returns:
        LifetimeResult; the fitted amplitude refers to the window start

    Raises:
        FitFailure: the fit did not converge
    """
    options = options or FitOptions(poisson_weighting=True)
    peak = int(np.argmax(trace.counts))
    if fit_window is None:
        start_index = min(peak + LIFETIME_WINDOW_SKIP_BINS, trace.time_ps.size - 1)
        fit_window = (float(trace.time_ps[start_index]), float(trace.time_ps[-1]))
    start, end = fit_window
    if not start < end:
        raise ArgumentError(f"fit window start ({start}) must precede its end ({end})")
    if start <= trace.time_ps[peak] <= end:
        logger.warning(
            f"Lifetime window [{start:.0f}, {end:.0f}] ps contains the peak at "
            f"{trace.time_ps[peak]:.0f} ps; the rise biases the fitted lifetime"
        )

    inside = (trace.time_ps >= start) & (trace.time_ps <= end)
    t = trace.time_ps[inside] - start
    y = trace.counts[inside]
    result = _require_converged(fit(ModelSpec(ModelKind.EXPONENTIAL_DECAY), t, y, options=options), "lifetime")
    tau = Measurement(result.parameter("lifetime"), result.uncertainty("lifetime"))
    logger.info(f"Lifetime {trace.description or 'trace'}: {tau} ps")
    return LifetimeResult(tau, result, (start, end))


def purcell_factor(tau_reference_ps: Measurement, tau_cavity_ps: Measurement) -> Measurement:
    """F_p = tau_reference / tau_cavity with first-order ratio propagation."""
    if not tau_reference_ps.value > 0:
        raise DomainError("reference lifetime must be > 0", parameter="tau_reference_ps")
    if not tau_cavity_ps.value > 0:
        raise DomainError("cavity lifetime must be > 0", parameter="tau_cavity_ps")
    return tau_reference_ps.ratio(tau_cavity_ps)


def q_factor(
    spectrum: Spectrum,
    window: Optional[Tuple[float, float]] = None,
    options: Optional[FitOptions] = None,
) -> QFactorResult:
    """
    Q = center / (2 HWHM) from a Lorentzian fit; sigma from the fit
    covariance of center and width.
    """
    x, y = spectrum.axis, spectrum.counts
    if window is not None:
        inside = (x >= window[0]) & (x <= window[1])
        x, y = x[inside], y[inside]
    result = _require_converged(fit(ModelSpec(ModelKind.LORENTZIAN_1D), x, y, options=options), "Q factor")
    center, hwhm = result.parameter("center"), result.parameter("hwhm")
    q = center / (2.0 * hwhm)
    gradient = np.array([1.0 / (2.0 * hwhm), -center / (2.0 * hwhm * hwhm)])
    sub = result.covariance[1:3, 1:3]
    sigma = math.sqrt(max(float(gradient @ sub @ gradient), 0.0))
    return QFactorResult(Measurement(q, sigma), center, hwhm, spectrum.unit, result)


def fit_saturation(
    powers: Sequence[float],
    counts_per_s: Sequence[float],
    options: Optional[FitOptions] = None,
) -> SaturationResult:
    """S (1 - exp(-P / P_sat)) fit; needs at least three distinct powers."""
    powers = np.asarray(powers, dtype=float)
    counts_per_s = np.asarray(counts_per_s, dtype=float)
    if np.unique(powers).size < 3:
        raise ArgumentError("saturation fit needs at least 3 distinct pump powers")
    if np.any(powers < 0):
        raise ArgumentError("pump powers must be >= 0")
    result = _require_converged(
        fit(ModelSpec(ModelKind.SATURATION_CURVE), powers, counts_per_s, options=options), "saturation"
    )
    return SaturationResult(
        Measurement(result.parameter("saturated_counts"), result.uncertainty("saturated_counts")),
        Measurement(result.parameter("saturation_power"), result.uncertainty("saturation_power")),
        result,
    )


def g2_zero(
    hist: CoincidenceHistogram,
    integration_halfwidth_ns: Optional[float] = None,
    side_peaks_per_side: int = 2,
    dip_halfwidth_ns: Optional[float] = None,
) -> G2Result:
    """
    g2(0) = central area / mean of the nearest side-peak areas.

    Args:
        hist: Coincidence histogram
        integration_halfwidth_ns: Window around each peak (default T/4)
        side_peaks_per_side: Side peaks used on each side
        dip_halfwidth_ns: Optional narrower window; the value computed with
            it is reported as dip_g2

    Returns:
        G2Result with Poisson uncertainties

    Raises:
        DegenerateHistogramError: no counts in the side peaks
    """
    period = hist.rep_period_ns
    halfwidth = period / 4.0 if integration_halfwidth_ns is None else float(integration_halfwidth_ns)
    if not 0 < halfwidth < period / 2.0:
        raise ArgumentError(f"integration halfwidth must be in (0, {period / 2:.4g}) ns, got {halfwidth}")
    if side_peaks_per_side < 1:
        raise ArgumentError("need at least one side peak per side")

    centers = [k * period for k in range(1, side_peaks_per_side + 1)]
    centers = [-c for c in reversed(centers)] + centers
    for c in centers:
        if not hist.covers(c, halfwidth):
            raise ArgumentError(f"side peak at {c:.3f} ns is not fully inside the histogram")

    def ratio(window: float) -> Tuple[float, float, float, Tuple[float, ...]]:
        central = hist.area(0.0, window)
        sides = tuple(hist.area(c, window) for c in centers)
        mean_side = sum(sides) / len(sides)
        if mean_side == 0:
            raise DegenerateHistogramError(f"side peaks hold no counts within +-{window:.3g} ns")
        g2 = central / mean_side
        sigma_mean = math.sqrt(sum(sides)) / len(sides)
        sigma = quadrature(math.sqrt(central) / mean_side, g2 * sigma_mean / mean_side)
        return g2, sigma, central, sides

    g2, sigma, central, sides = ratio(halfwidth)
    dip = None
    if dip_halfwidth_ns is not None:
        if not 0 < dip_halfwidth_ns < halfwidth:
            raise ArgumentError("dip halfwidth must be positive and below the integration halfwidth")
        dip_g2, dip_sigma, _, _ = ratio(float(dip_halfwidth_ns))
        dip = Measurement(dip_g2, dip_sigma)

    logger.info(f"g2(0) = {g2:.4f} ± {sigma:.4f} (window ±{halfwidth:.3g} ns)")
    return G2Result(g2, sigma, central, sides, halfwidth, dip)


BudgetInput = Union[BudgetElement, Tuple[str, float, float], Dict[str, Any]]


def _as_element(item: BudgetInput) -> BudgetElement:
    if isinstance(item, BudgetElement):
        return item
    if isinstance(item, dict):
        try:
            return BudgetElement(str(item["name"]), float(item["transmission"]), float(item.get("rel_err", 0.0)))
        except KeyError as e:
            raise ArgumentError(f"budget element missing key {e}") from None
    name, transmission, rel_err = item
    return BudgetElement(str(name), float(transmission), float(rel_err))


def efficiency_budget(elements: Iterable[BudgetInput]) -> EfficiencyBudget:
    """Overall transmission = product; relative error = quadrature sum."""
    parsed = tuple(_as_element(e) for e in elements)
    if not parsed:
        raise ArgumentError("efficiency budget needs at least one element")
    transmission = math.prod(e.transmission for e in parsed)
    rel_err = quadrature(*(e.rel_err for e in parsed))
    return EfficiencyBudget(parsed, transmission, rel_err)


def extraction_efficiency(
    detected_counts_per_s: float,
    rep_rate_hz: float,
    budget: EfficiencyBudget,
    g2: Measurement,
    sigma_detected_counts_per_s: float = 0.0,
) -> Measurement:
    """
    eta = (detected / rep_rate) / T_setup / (1 + g2).

    The relative error combines the budget's relative error, sigma_g2/(1+g2)
    and the count-rate relative error in quadrature.
    """
    if not detected_counts_per_s > 0:
        raise DomainError("detected count rate must be > 0", parameter="detected_counts_per_s")
    if not rep_rate_hz > 0:
        raise DomainError("repetition rate must be > 0", parameter="rep_rate_hz")
    if not budget.transmission > 0:
        raise DomainError("setup transmission must be > 0", parameter="budget")
    if not g2.value >= 0:
        raise DomainError(f"g2 must be >= 0, got {g2.value}", parameter="g2")

    eta = detected_counts_per_s / rep_rate_hz / budget.transmission / (1.0 + g2.value)
    rel_err = quadrature(
        budget.rel_err,
        g2.sigma / (1.0 + g2.value),
        sigma_detected_counts_per_s / detected_counts_per_s,
    )
    if eta > 1.0:
        logger.warning(f"Extraction efficiency {eta:.3f} exceeds unity")
    return Measurement(eta, eta * rel_err)


def build_source_report(
    lifetime_cavity: Optional[LifetimeResult] = None,
    lifetime_reference: Optional[LifetimeResult] = None,
    q: Optional[QFactorResult] = None,
    g2: Optional[G2Result] = None,
    saturation: Optional[SaturationResult] = None,
    budget: Optional[EfficiencyBudget] = None,
    detected_counts_per_s: Optional[float] = None,
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ,
    pump_power_density_w_cm2: Optional[float] = None,
) -> SourceReport:
    """
    Assemble a SourceReport from whichever analyses were run.

    The Purcell factor needs both lifetimes; the efficiency needs a budget,
    g2 and a count rate (explicit, or the saturated rate of the fit).
    """
    notes = []
    purcell = None
    if lifetime_cavity and lifetime_reference:
        purcell = purcell_factor(lifetime_reference.tau_ps, lifetime_cavity.tau_ps)

    counts = detected_counts_per_s
    if counts is None and saturation is not None:
        counts = saturation.saturated_counts_per_s.value
        notes.append("efficiency uses the saturated count rate of the saturation fit")

    eta = None
    if budget is not None and g2 is not None and counts is not None:
        eta = extraction_efficiency(counts, rep_rate_hz, budget, g2.measurement)
    elif budget is not None:
        notes.append("efficiency not computed: needs g2 and a count rate")

    return SourceReport(
        lifetime_cavity_ps=lifetime_cavity.tau_ps if lifetime_cavity else None,
        lifetime_reference_ps=lifetime_reference.tau_ps if lifetime_reference else None,
        purcell=purcell,
        q_factor=q.q if q else None,
        g2_zero=g2.measurement if g2 else None,
        saturated_counts_per_s=saturation.saturated_counts_per_s if saturation else None,
        extraction_efficiency=eta,
        budget=budget,
        pump_power_density_w_cm2=pump_power_density_w_cm2,
        notes=tuple(notes),
    )
