"""
Peak models: Gaussian1D and Lorentzian1D.

Both share the heuristic start used for line cuts and spectra: argmax for
the center, max - min for the amplitude, min for the offset and a width from
the second moment of the contiguous above-half-maximum core around the peak.
"""

import math
from typing import Tuple

import numpy as np

from models.base_model import BaseModel
from utils.errors import ArgumentError, DegenerateDataError

# FWHM = 2 sqrt(2 ln 2) sigma
GAUSSIAN_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class _PeakModel(BaseModel):
    """Shared layout: [amplitude, center, width, offset]."""

    @property
    def positive_parameters(self) -> Tuple[int, ...]:
        return (2,)

    @property
    def location_index(self) -> int:
        return 1

    @property
    def scale_indices(self) -> Tuple[int, ...]:
        return (0, 3)

    def _width_from_fwhm(self, fwhm: float) -> float:
        raise NotImplementedError

    def initial_guess(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size == 0 or x.size != y.size:
            raise ArgumentError(f"{self.name}: need non-empty x and y of equal length")
        lo, hi = float(np.min(y)), float(np.max(y))
        if hi == lo:
            raise DegenerateDataError(f"{self.name}: data are flat (max == min == {hi})")

        peak = int(np.argmax(y))
        amplitude = hi - lo
        half = lo + 0.5 * amplitude

        left = peak
        while left > 0 and y[left - 1] >= half:
            left -= 1
        right = peak
        while right < y.size - 1 and y[right + 1] >= half:
            right += 1

        core_x = x[left:right + 1]
        core_w = y[left:right + 1] - lo
        variance = float(np.sum(core_w * (core_x - x[peak]) ** 2) / np.sum(core_w))
        # the core is treated as a top-hat: variance = FWHM^2 / 12
        fwhm = math.sqrt(12.0 * variance)
        spacing = float(np.median(np.abs(np.diff(x)))) if x.size > 1 else 1.0
        fwhm = max(fwhm, spacing, 1e-12)

        return np.array([amplitude, x[peak], self._width_from_fwhm(fwhm), lo])


class Gaussian1D(_PeakModel):
    """offset + A exp(-(x - c)^2 / (2 sigma^2))"""

    @property
    def name(self) -> str:
        return "Gaussian1D"

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return ("amplitude", "center", "sigma", "offset")

    @property
    def parameter_units(self) -> Tuple[str, ...]:
        return ("counts", "px", "px", "counts")

    def _width_from_fwhm(self, fwhm: float) -> float:
        return fwhm / GAUSSIAN_FWHM_PER_SIGMA

    def _evaluate(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        amplitude, center, sigma, offset = params
        return offset + amplitude * np.exp(-((x - center) ** 2) / (2.0 * sigma * sigma))


class Lorentzian1D(_PeakModel):
    """offset + A w^2 / ((x - c)^2 + w^2), w = half width at half maximum"""

    @property
    def name(self) -> str:
        return "Lorentzian1D"

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return ("amplitude", "center", "hwhm", "offset")

    @property
    def parameter_units(self) -> Tuple[str, ...]:
        return ("counts", "px", "px", "counts")

    def _width_from_fwhm(self, fwhm: float) -> float:
        return 0.5 * fwhm

    def _evaluate(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        amplitude, center, hwhm, offset = params
        w2 = hwhm * hwhm
        return offset + amplitude * w2 / ((x - center) ** 2 + w2)
