"""
Fit Engine - Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Used by every analysis module: line-cut peaks, decay curves, cavity spectra
and saturation curves. Returns parameters with a covariance matrix
s^2 (J^T W J)^-1 so that every downstream "one sigma" traces back here.

Data are standardized before iterating: the abscissa is measured from its
mean for models with a location parameter, and the ordinate is divided by
max|y|. Results are mapped back afterwards, which makes fits equivariant
under shifts of x and scaling of y up to rounding.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import scipy.linalg

from models.model_registry import ModelSpec
from utils.errors import ArgumentError, DegenerateFitError

logger = logging.getLogger(__name__)

MAX_DAMPING = 1e16
MIN_DAMPING = 1e-15
# relative residual treated as an exact fit
EXACT_FIT_RTOL = 1e-24


@dataclass(frozen=True)
class FitOptions:
    """Tolerances and damping schedule for fit()."""
    ftol: float = 1e-10
    xtol: float = 1e-10
    gtol: float = 1e-6
    max_iterations: int = 200
    initial_damping: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    poisson_weighting: bool = False

    @classmethod
    def from_settings(cls, settings: Any, **overrides: Any) -> "FitOptions":
        """Build options from the `fit` section of utils.settings.Settings."""
        values = {k: v for k, v in settings.fit_options().items() if k in cls.__dataclass_fields__}
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with one-sigma uncertainties and covariance."""
    spec: ModelSpec
    parameters: np.ndarray
    uncertainties: np.ndarray
    covariance: np.ndarray
    residual_sum_squares: float
    converged: bool
    iterations: int
    gradient_norm: float = field(default=0.0)

    def __post_init__(self):
        for name in ("parameters", "uncertainties", "covariance"):
            value = np.array(getattr(self, name), dtype=float)
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def _index(self, name: str) -> int:
        try:
            return self.spec.parameter_names.index(name)
        except ValueError:
            raise ArgumentError(f"{self.spec.kind.value} has no parameter '{name}'") from None

    def parameter(self, name: str) -> float:
        return float(self.parameters[self._index(name)])

    def uncertainty(self, name: str) -> float:
        return float(self.uncertainties[self._index(name)])

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready report; covariance is row-major."""
        return {
            "model": self.spec.kind.value,
            "parameter_names": list(self.spec.parameter_names),
            "parameter_units": list(self.spec.parameter_units),
            "parameters": [float(v) for v in self.parameters],
            "uncertainties": [float(v) for v in self.uncertainties],
            "covariance": [float(v) for v in self.covariance.ravel()],
            "residual_sum_squares": float(self.residual_sum_squares),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "gradient_norm": float(self.gradient_norm),
        }


def evaluate_model(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y[i] = model(params, x[i]); raises DomainError for out-of-bounds parameters."""
    return spec.model.evaluate(params, x)


def initial_guess(spec: ModelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Heuristic starting point, clamped inside the bounds."""
    model = spec.model
    return model.clamp(model.initial_guess(x, y))


def fit(
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
    weights: Optional[np.ndarray] = None,
    init: Optional[np.ndarray] = None,
    options: Optional[FitOptions] = None,
) -> FitResult:
    """
    Weighted nonlinear least squares by damped Gauss-Newton.

    Args:
        spec: Model kind to fit
        x: Abscissa samples
        y: Ordinate samples
        weights: Per-sample weights (default: unit, or Poisson if the
            options ask for it)
        init: Starting parameters (default: initial_guess)
        options: Tolerances and damping schedule

    Returns:
        FitResult; converged=False when max_iterations is exhausted

    Raises:
        DegenerateFitError: J^T W J is singular at the solution
    """
    options = options or FitOptions()
    model = spec.model
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_params = model.n_parameters
    if x.ndim != 1 or x.shape != y.shape:
        raise ArgumentError(f"x and y must be 1D of equal length, got {x.shape} and {y.shape}")
    if x.size < n_params + 1:
        raise ArgumentError(
            f"{model.name} needs at least {n_params + 1} samples, got {x.size}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ArgumentError("x and y must be finite")

    w = _resolve_weights(weights, y, options.poisson_weighting)
    start = model.check_bounds(init) if init is not None else initial_guess(spec, x, y)

    # standardize
    x0 = float(np.mean(x)) if model.location_index is not None else 0.0
    scale = float(np.max(np.abs(y))) or 1.0
    to_std = np.ones(n_params)
    to_std[list(model.scale_indices)] = 1.0 / scale
    xs = x - x0
    ys = y / scale
    p = start * to_std
    if model.location_index is not None:
        p[model.location_index] -= x0
    p = model.clamp(p)

    def predict(params: np.ndarray) -> np.ndarray:
        return model._evaluate(params, xs)

    r = ys - predict(p)
    cost = float(np.sum(w * r * r))
    exact_floor = EXACT_FIT_RTOL * float(np.sum(w * ys * ys))
    damping = options.initial_damping
    iterations = 0
    converged = False
    small_change = False

    while True:
        jac = _jacobian_forward(model, p, xs, ys - r)
        grad_norm = _gradient_cosine(jac, r, w)
        if cost <= exact_floor or (small_change and grad_norm <= options.gtol):
            converged = True
            break
        if iterations >= options.max_iterations:
            break
        iterations += 1

        jw = jac * w[:, None]
        normal = jac.T @ jw
        gradient = jw.T @ r
        diag = np.diag(normal).copy()
        diag[diag <= 0] = 1.0

        accepted = False
        while damping <= MAX_DAMPING:
            try:
                step = scipy.linalg.solve(normal + damping * np.diag(diag), gradient, assume_a="sym")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                damping *= options.damping_increase
                continue
            trial = model.clamp(p + step)
            r_trial = ys - predict(trial)
            cost_trial = float(np.sum(w * r_trial * r_trial))
            if np.isfinite(cost_trial) and cost_trial <= cost:
                accepted = True
                damping = max(damping * options.damping_decrease, MIN_DAMPING)
                break
            damping *= options.damping_increase

        if not accepted:
            # no downhill step left: numerical minimum
            logger.debug(f"{model.name}: damping exhausted after {iterations} iterations")
            jac = _jacobian_forward(model, p, xs, ys - r)
            grad_norm = _gradient_cosine(jac, r, w)
            converged = grad_norm <= options.gtol or cost <= exact_floor
            break

        rel_decrease = (cost - cost_trial) / cost if cost > 0 else 0.0
        rel_step = float(np.linalg.norm(trial - p) / max(np.linalg.norm(p), 1e-300))
        small_change = rel_decrease < options.ftol or rel_step < options.xtol
        logger.debug(
            f"{model.name} iter {iterations}: cost={cost_trial:.6g} "
            f"rel_step={rel_step:.2e} damping={damping:.1e}"
        )
        p, r, cost = trial, r_trial, cost_trial

    covariance_std = _covariance(model, p, xs, w, cost, x.size - n_params)

    # back to original units
    params = p.copy()
    if model.location_index is not None:
        params[model.location_index] += x0
    back = 1.0 / to_std
    params *= back
    covariance = covariance_std * np.outer(back, back)
    covariance = 0.5 * (covariance + covariance.T)
    uncertainties = np.sqrt(np.clip(np.diag(covariance), 0.0, None))

    if not converged:
        logger.warning(f"{model.name} fit did not converge in {iterations} iterations")
    return FitResult(
        spec=spec,
        parameters=params,
        uncertainties=uncertainties,
        covariance=covariance,
        residual_sum_squares=cost * scale * scale,
        converged=converged,
        iterations=iterations,
        gradient_norm=grad_norm,
    )


def _resolve_weights(weights: Optional[np.ndarray], y: np.ndarray, poisson: bool) -> np.ndarray:
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape:
            raise ArgumentError(f"weights shape {w.shape} does not match data {y.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ArgumentError("weights must be finite and non-negative")
        return w
    if poisson:
        return 1.0 / np.maximum(y, 1.0)
    return np.ones_like(y)


def _steps(p: np.ndarray) -> np.ndarray:
    return np.maximum(1e-7 * np.abs(p), 1e-9)


def _jacobian_forward(model, p: np.ndarray, x: np.ndarray, f0: np.ndarray) -> np.ndarray:
    """Forward differences, step max(1e-7 |p|, 1e-9) per parameter."""
    jac = np.empty((x.size, p.size))
    for j, h in enumerate(_steps(p)):
        shifted = p.copy()
        shifted[j] += h
        jac[:, j] = (model._evaluate(shifted, x) - f0) / h
    return jac


def _jacobian_central(model, p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Central differences; falls back to forward steps at a positivity bound."""
    jac = np.empty((x.size, p.size))
    f0 = None
    for j, h in enumerate(_steps(p)):
        up = p.copy()
        up[j] += h
        down = p.copy()
        down[j] -= h
        if j in model.positive_parameters and down[j] <= 0:
            if f0 is None:
                f0 = model._evaluate(p, x)
            jac[:, j] = (model._evaluate(up, x) - f0) / h
        else:
            jac[:, j] = (model._evaluate(up, x) - model._evaluate(down, x)) / (2.0 * h)
    return jac


def _gradient_cosine(jac: np.ndarray, r: np.ndarray, w: np.ndarray) -> float:
    """max_i |J_i^T W r| / (|sqrt(W) J_i| |sqrt(W) r|), 0 at a stationary point."""
    sw = np.sqrt(w)
    r_norm = float(np.linalg.norm(sw * r))
    if r_norm == 0.0:
        return 0.0
    col_norms = np.linalg.norm(jac * sw[:, None], axis=0)
    col_norms[col_norms == 0] = 1.0
    return float(np.max(np.abs(jac.T @ (w * r)) / (col_norms * r_norm)))


def _covariance(model, p: np.ndarray, x: np.ndarray, w: np.ndarray, cost: float, dof: int) -> np.ndarray:
    """s^2 (J^T W J)^-1 with s^2 = cost / dof, J by central differences."""
    jac = _jacobian_central(model, p, x)
    normal = jac.T @ (jac * w[:, None])
    diag = np.diag(normal)
    if np.any(diag <= 0) or not np.all(np.isfinite(normal)):
        raise DegenerateFitError(f"{model.name}: a parameter has no influence on the model")
    d = 1.0 / np.sqrt(diag)
    scaled = normal * np.outer(d, d)
    eigenvalues = np.linalg.eigvalsh(scaled)
    if eigenvalues[0] <= 1e-14 * eigenvalues[-1]:
        raise DegenerateFitError(
            f"{model.name}: J^T W J is singular (condition {eigenvalues[-1] / max(eigenvalues[0], 1e-300):.2e})"
        )
    inverse = scipy.linalg.inv(scaled) * np.outer(d, d)
    variance = cost / dof
    return variance * 0.5 * (inverse + inverse.T)
