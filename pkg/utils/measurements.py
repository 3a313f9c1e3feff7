"""
Measurement value type: a value with a one-standard-deviation uncertainty.
"""

import math
from dataclasses import dataclass
from typing import Dict


@dataclass(frozen=True)
class Measurement:
    """A value ± one sigma, propagated to first order."""
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or math.isnan(self.sigma):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def rel_err(self) -> float:
        """Relative uncertainty sigma/|value| (inf for a zero value with sigma)."""
        if self.value == 0:
            return 0.0 if self.sigma == 0 else math.inf
        return self.sigma / abs(self.value)

    def ratio(self, other: "Measurement") -> "Measurement":
        """self/other with independent relative errors added in quadrature."""
        value = self.value / other.value
        return Measurement(value, abs(value) * math.hypot(self.rel_err, other.rel_err))

    def product(self, other: "Measurement") -> "Measurement":
        value = self.value * other.value
        return Measurement(value, abs(value) * math.hypot(self.rel_err, other.rel_err))

    def to_dict(self) -> Dict[str, float]:
        return {"value": self.value, "sigma": self.sigma}

    def __str__(self) -> str:
        return f"{self.value:.6g} ± {self.sigma:.2g}"


def quadrature(*sigmas: float) -> float:
    """Root-sum-square of independent uncertainties."""
    return math.sqrt(math.fsum(s * s for s in sigmas))
