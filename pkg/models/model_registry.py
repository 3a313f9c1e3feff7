"""
Model Registry - Maps model kinds to their implementations.

Supported kinds:
- Gaussian1D: alignment-mark line cuts
- Lorentzian1D: emitter line cuts, cavity-mode spectra
- ExponentialDecay: time-resolved photoluminescence
- SaturationCurve: detected counts versus pump power
"""

from enum import Enum
from dataclasses import dataclass
from typing import Dict, Tuple

from models.base_model import BaseModel
from models.decay_models import ExponentialDecay, SaturationCurve
from models.peak_models import Gaussian1D, Lorentzian1D


class ModelKind(Enum):
    GAUSSIAN_1D = "Gaussian1D"
    LORENTZIAN_1D = "Lorentzian1D"
    EXPONENTIAL_DECAY = "ExponentialDecay"
    SATURATION_CURVE = "SaturationCurve"


MODELS: Dict[ModelKind, BaseModel] = {
    ModelKind.GAUSSIAN_1D: Gaussian1D(),
    ModelKind.LORENTZIAN_1D: Lorentzian1D(),
    ModelKind.EXPONENTIAL_DECAY: ExponentialDecay(),
    ModelKind.SATURATION_CURVE: SaturationCurve(),
}


@dataclass(frozen=True)
class ModelSpec:
    """A model kind together with its parameter names and units."""
    kind: ModelKind

    @property
    def model(self) -> BaseModel:
        return MODELS[self.kind]

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return self.model.parameter_names

    @property
    def parameter_units(self) -> Tuple[str, ...]:
        return self.model.parameter_units
