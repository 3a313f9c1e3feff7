"""
Histogram Simulator - Synthetic pulsed coincidence histograms.

A pulse train of Gaussian coincidence peaks at multiples of the repetition
period. Side peaks share one expected area S; the central structure holds
g2_target * S, split into a residual zero-delay peak and two recapture
bumps displaced by +-delay_ns. Expected counts per bin integrate the peak
shape exactly (normal CDF differences) before Poisson sampling.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from services.photon_stats import DEFAULT_REP_RATE_HZ, CoincidenceHistogram
from utils.errors import ArgumentError
from utils.rng import get_rng

logger = logging.getLogger(__name__)

DEFAULT_REP_PERIOD_NS = 1e9 / DEFAULT_REP_RATE_HZ


@dataclass(frozen=True)
class RecaptureSpec:
    """Fraction of the central area moved into two bumps at +-delay_ns."""
    delay_ns: float = 1.5
    fraction: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ArgumentError(f"recapture fraction must be in [0, 1], got {self.fraction}")
        if not self.delay_ns >= 0:
            raise ArgumentError(f"recapture delay must be >= 0, got {self.delay_ns}")


@dataclass(frozen=True)
class SourceSpec:
    """What the simulated source looks like in a correlation measurement."""
    g2_target: float
    recapture: Optional[RecaptureSpec] = None

    def __post_init__(self):
        if not self.g2_target >= 0:
            raise ArgumentError(f"g2_target must be >= 0, got {self.g2_target}")


def _peaks(source: SourceSpec, period: float, n_periods: int, side_area: float) -> List[Tuple[float, float]]:
    """(center_ns, expected_area) of every peak."""
    peaks = [(k * period, side_area) for k in range(-n_periods, n_periods + 1) if k != 0]
    central = source.g2_target * side_area
    fraction = source.recapture.fraction if source.recapture else 0.0
    if central > 0:
        if fraction < 1.0:
            peaks.append((0.0, (1.0 - fraction) * central))
        if fraction > 0.0:
            delay = source.recapture.delay_ns
            peaks.append((-delay, 0.5 * fraction * central))
            peaks.append((delay, 0.5 * fraction * central))
    return peaks


def expected_histogram(
    source: SourceSpec,
    rep_period_ns: float = DEFAULT_REP_PERIOD_NS,
    peak_sigma_ns: float = 0.35,
    total_pairs: float = 1e5,
    bin_width_ns: float = 0.1,
    n_periods: int = 4,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bin centers and expected counts. Bins span +-(n_periods + 1/2) periods,
    symmetric about zero delay.
    """
    if not (rep_period_ns > 0 and peak_sigma_ns > 0 and bin_width_ns > 0):
        raise ArgumentError("rep_period_ns, peak_sigma_ns and bin_width_ns must be > 0")
    if n_periods < 3:
        raise ArgumentError(f"n_periods must be >= 3, got {n_periods}")
    if not total_pairs > 0:
        raise ArgumentError(f"total_pairs must be > 0, got {total_pairs}")

    n_bins = int(round((2 * n_periods + 1) * rep_period_ns / bin_width_ns))
    edges = (np.arange(n_bins + 1) - 0.5 * n_bins) * bin_width_ns
    side_area = total_pairs / (2 * n_periods + source.g2_target)

    expected = np.zeros(n_bins)
    for center, area in _peaks(source, rep_period_ns, n_periods, side_area):
        cdf = stats.norm.cdf(edges, loc=center, scale=peak_sigma_ns)
        expected += area * np.diff(cdf)
    return 0.5 * (edges[:-1] + edges[1:]), expected


def simulate_histogram(
    source: SourceSpec,
    rep_period_ns: float = DEFAULT_REP_PERIOD_NS,
    peak_sigma_ns: float = 0.35,
    total_pairs: float = 1e5,
    seed: int = 0,
    bin_width_ns: float = 0.1,
    n_periods: int = 4,
) -> CoincidenceHistogram:
    """
    Poisson-sampled coincidence histogram; identical for a fixed seed.

    Args:
        source: g2 target and optional recapture bumps
        rep_period_ns: Laser repetition period
        peak_sigma_ns: Gaussian width of every peak (timing jitter)
        total_pairs: Expected coincidences over all peaks
        seed: Random seed
        bin_width_ns: Histogram bin width
        n_periods: Side peaks on each side of zero delay
    """
    delay, expected = expected_histogram(
        source, rep_period_ns, peak_sigma_ns, total_pairs, bin_width_ns, n_periods
    )
    counts = get_rng(seed).poisson(expected).astype(float)
    logger.debug(
        f"Simulated histogram: g2_target={source.g2_target}, {counts.sum():.0f} pairs, seed={seed}"
    )
    return CoincidenceHistogram(delay, counts, rep_period_ns, bin_width_ns)
