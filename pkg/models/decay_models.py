"""
Decay and saturation models used by source characterization.
"""

import math
from typing import Tuple

import numpy as np

from models.base_model import BaseModel
from utils.errors import ArgumentError, DegenerateDataError


def _check_xy(name: str, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or x.size != y.size:
        raise ArgumentError(f"{name}: need non-empty x and y of equal length")
    if float(np.max(y)) == float(np.min(y)):
        raise DegenerateDataError(f"{name}: data are flat (max == min == {float(y[0])})")
    return x, y


class ExponentialDecay(BaseModel):
    """offset + A exp(-t / tau)"""

    @property
    def name(self) -> str:
        return "ExponentialDecay"

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return ("amplitude", "lifetime", "offset")

    @property
    def parameter_units(self) -> Tuple[str, ...]:
        return ("counts", "ps", "counts")

    @property
    def positive_parameters(self) -> Tuple[int, ...]:
        return (1,)

    @property
    def scale_indices(self) -> Tuple[int, ...]:
        return (0, 2)

    def _evaluate(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        amplitude, lifetime, offset = params
        return offset + amplitude * np.exp(-x / lifetime)

    def initial_guess(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = _check_xy(self.name, x, y)
        lo, hi = float(np.min(y)), float(np.max(y))
        offset = lo
        tail = y - offset
        usable = tail > 0.05 * (hi - lo)
        span = float(np.max(x) - np.min(x)) or 1.0

        lifetime = span / 3.0
        amplitude = hi - lo
        if np.count_nonzero(usable) >= 2:
            # log-linear regression on the background-subtracted tail
            slope, intercept = np.polyfit(
                x[usable], np.log(tail[usable]), 1, w=np.sqrt(tail[usable])
            )
            if np.isfinite(slope) and slope < 0:
                lifetime = -1.0 / slope
                with np.errstate(over="ignore"):
                    guess = math.exp(intercept) if intercept < 700 else math.inf
                if math.isfinite(guess):
                    amplitude = guess
        return np.array([amplitude, max(lifetime, 1e-12), offset])


class SaturationCurve(BaseModel):
    """S (1 - exp(-P / P_sat))"""

    @property
    def name(self) -> str:
        return "SaturationCurve"

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return ("saturated_counts", "saturation_power")

    @property
    def parameter_units(self) -> Tuple[str, ...]:
        return ("counts/s", "power")

    @property
    def positive_parameters(self) -> Tuple[int, ...]:
        return (1,)

    @property
    def scale_indices(self) -> Tuple[int, ...]:
        return (0,)

    def _evaluate(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        saturated, p_sat = params
        return saturated * -np.expm1(-x / p_sat)

    def initial_guess(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = _check_xy(self.name, x, y)
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[order]
        saturated = float(np.max(ys))
        reached = np.nonzero(ys >= (1.0 - math.exp(-1.0)) * saturated)[0]
        p_sat = float(xs[reached[0]]) if reached.size else float(np.median(xs))
        if p_sat <= 0:
            positive = xs[xs > 0]
            p_sat = float(positive[0]) if positive.size else 1.0
        return np.array([saturated, p_sat])
