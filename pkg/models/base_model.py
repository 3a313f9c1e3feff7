"""
Base Model Interface - Abstract class for all fit model kinds.
Every model kind implements this interface so the fit engine can treat
them uniformly.
"""

from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from utils.errors import ArgumentError, DomainError

# Clamp floor for strictly positive parameters.
POSITIVE_FLOOR = 1e-12


class BaseModel(ABC):
    """
    Abstract base class for 1D model functions y = f(params, x).
    Implement this interface for Gaussian, Lorentzian, decay, saturation, etc.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Model kind name as used in reports."""
        pass

    @property
    @abstractmethod
    def parameter_names(self) -> Tuple[str, ...]:
        """Parameter names in vector order."""
        pass

    @property
    @abstractmethod
    def parameter_units(self) -> Tuple[str, ...]:
        """Units of each parameter, same order as parameter_names."""
        pass

    @property
    def positive_parameters(self) -> Tuple[int, ...]:
        """Indices of parameters that must be strictly positive."""
        return ()

    @property
    def location_index(self) -> Optional[int]:
        """Index of the parameter that shifts with the abscissa, if any."""
        return None

    @property
    def scale_indices(self) -> Tuple[int, ...]:
        """Indices of parameters that scale linearly with the ordinate."""
        return ()

    @property
    def n_parameters(self) -> int:
        return len(self.parameter_names)

    @abstractmethod
    def _evaluate(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Model values without bounds checks."""
        pass

    @abstractmethod
    def initial_guess(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        Heuristic starting point for a fit.

        Args:
            x: Abscissa samples
            y: Ordinate samples

        Returns:
            Parameter vector within bounds
        """
        pass

    def evaluate(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate the model after checking parameter bounds."""
        params = self.check_bounds(params)
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ArgumentError(f"{self.name}: abscissa contains non-finite values")
        return self._evaluate(params, x)

    def check_bounds(self, params: np.ndarray) -> np.ndarray:
        """Validate a parameter vector; raises DomainError naming the parameter."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_parameters,):
            raise ArgumentError(
                f"{self.name} takes {self.n_parameters} parameters, got shape {params.shape}"
            )
        for i, value in enumerate(params):
            name = self.parameter_names[i]
            if not np.isfinite(value):
                raise DomainError(f"{self.name}: parameter '{name}' is not finite", parameter=name)
            if i in self.positive_parameters and value <= 0:
                raise DomainError(
                    f"{self.name}: parameter '{name}' must be > 0, got {value}", parameter=name
                )
        return params

    def clamp(self, params: np.ndarray) -> np.ndarray:
        """Project a parameter vector back inside the bounds."""
        params = np.array(params, dtype=float)
        for i in self.positive_parameters:
            params[i] = max(params[i], POSITIVE_FLOOR)
        return params
