"""
Cavity Design Service - Micropillar fundamental-mode calculator.

The mode energy of a pillar of radius R etched from a planar cavity is

    E = sqrt(E_2D^2 + (hbar c)^2 chi^2 / (eps R^2))

with chi a zero of a Bessel function. The module provides the forward
relation, its analytic inverse, snapping to a fabrication grid of
diameters, and a Monte-Carlo estimate of how many devices can be
temperature-tuned into resonance with their emitter.

Physical constants: hbar c = 197.327 eV nm, E [eV] = 1239.842 / lambda [nm].
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from services.bessel import bessel_zero
from utils.errors import ArgumentError, DomainError, InfeasibleTargetError
from utils.rng import trial_rng

logger = logging.getLogger(__name__)

HBAR_C_EV_NM = 197.327
EV_NM = 1239.842


def wavelength_to_energy(wavelength_nm: float) -> float:
    """Photon energy [eV] of a vacuum wavelength [nm]."""
    if not wavelength_nm > 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength_nm}", parameter="wavelength_nm")
    return EV_NM / wavelength_nm


def energy_to_wavelength(energy_ev: float) -> float:
    """Vacuum wavelength [nm] of a photon energy [eV]."""
    if not energy_ev > 0:
        raise DomainError(f"energy must be > 0, got {energy_ev}", parameter="energy_ev")
    return EV_NM / energy_ev


@dataclass(frozen=True)
class PlanarCavity:
    """The unetched planar cavity the pillars are made from."""
    e_2d_ev: float
    epsilon_eff: float = 11.9
    stopband_low_nm: float = 870.0
    stopband_high_nm: float = 980.0

    def __post_init__(self):
        if not self.e_2d_ev > 0:
            raise ArgumentError(f"e_2d_ev must be > 0, got {self.e_2d_ev}")
        if not self.epsilon_eff > 1:
            raise ArgumentError(f"epsilon_eff must be > 1, got {self.epsilon_eff}")
        if not self.stopband_low_nm < self.stopband_high_nm:
            raise ArgumentError(
                f"stopband low ({self.stopband_low_nm}) must be below high ({self.stopband_high_nm})"
            )

    @classmethod
    def from_settings(cls, settings: Any) -> "PlanarCavity":
        return cls(
            e_2d_ev=float(settings.get("cavity.e_2d_ev", 1.3477)),
            epsilon_eff=settings.get_epsilon_eff(),
            stopband_low_nm=float(settings.get("cavity.stopband_low_nm", 870.0)),
            stopband_high_nm=float(settings.get("cavity.stopband_high_nm", 980.0)),
        )

    def stopband_contains(self, wavelength_nm: float) -> bool:
        return self.stopband_low_nm <= wavelength_nm <= self.stopband_high_nm


@dataclass(frozen=True)
class ModeIndex:
    """
    Pillar mode HE(n_phi, n_r + 1). chi is the (n_r + 1)-th zero of
    J_{|n_phi - 1|}, so the fundamental HE11 mode (1, 0) has chi = 2.4048.
    """
    n_phi: int = 1
    n_r: int = 0
    chi: float = field(init=False)  # zero of J_{|n_phi - 1|}, not of J_{n_phi}

    def __post_init__(self):
        if self.n_phi < 0 or self.n_r < 0:
            raise ArgumentError(f"mode indices must be >= 0, got ({self.n_phi}, {self.n_r})")
        object.__setattr__(self, "chi", bessel_zero(abs(self.n_phi - 1), self.n_r))

    @property
    def label(self) -> str:
        return f"HE{self.n_phi}{self.n_r + 1}"

    def to_dict(self) -> Dict[str, Any]:
        return {"n_phi": self.n_phi, "n_r": self.n_r, "chi": self.chi, "label": self.label}


FUNDAMENTAL = ModeIndex(1, 0)


@dataclass(frozen=True)
class PillarDesign:
    """A pillar on the fabrication grid and how well it hits the target."""
    radius_nm: float
    diameter_um: float
    mode: ModeIndex
    energy_ev: float
    wavelength_nm: float
    target_ev: float
    detuning_meV: float
    exact_radius_nm: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radius_nm": self.radius_nm,
            "diameter_um": self.diameter_um,
            "mode": self.mode.to_dict(),
            "energy_ev": self.energy_ev,
            "wavelength_nm": self.wavelength_nm,
            "target_ev": self.target_ev,
            "target_wavelength_nm": energy_to_wavelength(self.target_ev),
            "detuning_meV": self.detuning_meV,
            "exact_radius_nm": self.exact_radius_nm,
        }


def _radius_nm(diameter_um):
    return np.asarray(diameter_um, dtype=float) * 500.0


def mode_energy(cavity: PlanarCavity, mode: ModeIndex, radius_nm: float) -> float:
    """Mode energy [eV] of a pillar of radius radius_nm."""
    if not radius_nm > 0:
        raise DomainError(f"radius_nm must be > 0, got {radius_nm}", parameter="radius_nm")
    lateral = HBAR_C_EV_NM * mode.chi / (math.sqrt(cavity.epsilon_eff) * radius_nm)
    return math.hypot(cavity.e_2d_ev, lateral)


def _mode_energies(cavity: PlanarCavity, mode: ModeIndex, radii_nm: np.ndarray) -> np.ndarray:
    lateral = HBAR_C_EV_NM * mode.chi / (math.sqrt(cavity.epsilon_eff) * radii_nm)
    return np.hypot(cavity.e_2d_ev, lateral)


def exact_radius(cavity: PlanarCavity, mode: ModeIndex, target_ev: float) -> float:
    """
    Continuous inverse R* = hbar c chi / sqrt(eps (T^2 - E_2D^2)).

    Raises:
        InfeasibleTargetError: target at or below the planar resonance
    """
    if not target_ev > cavity.e_2d_ev:
        raise InfeasibleTargetError(
            f"target {target_ev:.6g} eV is not above the planar resonance "
            f"{cavity.e_2d_ev:.6g} eV; a pillar can only blue-shift the mode"
        )
    gap = (target_ev - cavity.e_2d_ev) * (target_ev + cavity.e_2d_ev)
    return HBAR_C_EV_NM * mode.chi / math.sqrt(cavity.epsilon_eff * gap)


def select_radius(
    cavity: PlanarCavity,
    target_ev: float,
    mode: ModeIndex,
    diameter_grid_um: Sequence[float],
) -> PillarDesign:
    """
    Grid diameter whose mode lands closest to the target.

    Args:
        cavity: Planar cavity
        target_ev: Emitter line to match [eV]
        mode: Pillar mode
        diameter_grid_um: Fabricable diameters [um]

    Returns:
        PillarDesign minimizing |detuning|; ties go to the smaller diameter

    Raises:
        InfeasibleTargetError: target at or below E_2D
        ArgumentError: empty grid or non-positive diameters
    """
    grid = np.sort(np.asarray(diameter_grid_um, dtype=float).ravel())
    if grid.size == 0:
        raise ArgumentError("diameter grid is empty")
    if not np.all(grid > 0):
        raise ArgumentError("diameter grid values must be > 0")
    r_star = exact_radius(cavity, mode, target_ev)

    energies = _mode_energies(cavity, mode, _radius_nm(grid))
    best = int(np.argmin(np.abs(energies - target_ev)))
    energy = float(energies[best])
    wavelength = energy_to_wavelength(energy)
    if not cavity.stopband_contains(wavelength):
        logger.warning(
            f"Mode at {wavelength:.2f} nm lies outside the stopband "
            f"{cavity.stopband_low_nm:.0f}-{cavity.stopband_high_nm:.0f} nm"
        )
    return PillarDesign(
        radius_nm=float(_radius_nm(grid[best])),
        diameter_um=float(grid[best]),
        mode=mode,
        energy_ev=energy,
        wavelength_nm=wavelength,
        target_ev=float(target_ev),
        detuning_meV=(energy - target_ev) * 1000.0,
        exact_radius_nm=r_star,
    )


def mode_curve(
    cavity: PlanarCavity, mode: ModeIndex, diameters_um: Sequence[float]
) -> List[Tuple[float, float, float]]:
    """(diameter_um, energy_eV, wavelength_nm) for each diameter."""
    rows = []
    for d in diameters_um:
        energy = mode_energy(cavity, mode, float(_radius_nm(d)))
        rows.append((float(d), energy, energy_to_wavelength(energy)))
    return rows


def diameter_grid(min_um: float, max_um: float, step_um: float) -> np.ndarray:
    """Evenly spaced fabrication grid, both ends included."""
    if not (step_um > 0 and max_um >= min_um > 0):
        raise ArgumentError(f"invalid grid {min_um}..{max_um} step {step_um}")
    n = int(math.floor((max_um - min_um) / step_um + 1e-9)) + 1
    return min_um + step_um * np.arange(n)


class DistributionKind(Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"


@dataclass(frozen=True)
class EmitterDistribution:
    """
    Emitter energies at the design temperature, plus the random shift of
    the mode caused by fabrication.
    """
    kind: DistributionKind
    low_ev: Optional[float] = None
    high_ev: Optional[float] = None
    mean_ev: Optional[float] = None
    std_ev: Optional[float] = None
    fab_shift_std_meV: float = 0.0

    def __post_init__(self):
        if self.kind is DistributionKind.UNIFORM:
            if self.low_ev is None or self.high_ev is None or not 0 < self.low_ev <= self.high_ev:
                raise ArgumentError("uniform distribution needs 0 < low_ev <= high_ev")
        else:
            if self.mean_ev is None or self.std_ev is None or not (self.mean_ev > 0 and self.std_ev >= 0):
                raise ArgumentError("normal distribution needs mean_ev > 0 and std_ev >= 0")
        if not self.fab_shift_std_meV >= 0:
            raise ArgumentError(f"fab_shift_std_meV must be >= 0, got {self.fab_shift_std_meV}")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind is DistributionKind.UNIFORM:
            return float(rng.uniform(self.low_ev, self.high_ev))
        return float(rng.normal(self.mean_ev, self.std_ev))

    def sample_fab_shift_ev(self, rng: np.random.Generator) -> float:
        if self.fab_shift_std_meV == 0:
            return 0.0
        return float(rng.normal(0.0, self.fab_shift_std_meV)) / 1000.0


@dataclass(frozen=True)
class TuningRange:
    """Temperature window and linear shift coefficients [meV/K]."""
    t_min_k: float
    t_max_k: float
    de_dt_qd_meV_per_k: float = -0.05
    de_dt_mode_meV_per_k: float = -0.01

    def __post_init__(self):
        if not self.t_min_k <= self.t_max_k:
            raise ArgumentError(f"t_min_k ({self.t_min_k}) must not exceed t_max_k ({self.t_max_k})")

    def min_abs_detuning_ev(self, detuning_at_min_ev: float) -> float:
        """
        Smallest |E_QD(T) - E_mode(T)| over the window; detuning is linear in
        T so only the end points and a sign change matter.
        """
        slope = (self.de_dt_qd_meV_per_k - self.de_dt_mode_meV_per_k) / 1000.0
        at_max = detuning_at_min_ev + slope * (self.t_max_k - self.t_min_k)
        if detuning_at_min_ev * at_max <= 0:
            return 0.0
        return min(abs(detuning_at_min_ev), abs(at_max))


@dataclass(frozen=True)
class YieldEstimate:
    """Monte-Carlo device yield with a Clopper-Pearson interval."""
    successes: int
    trials: int
    yield_fraction: float
    standard_error: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95

    def to_dict(self) -> Dict[str, Any]:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "yield_fraction": self.yield_fraction,
            "standard_error": self.standard_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "confidence": self.confidence,
        }


def _yield_trial(
    cavity: PlanarCavity,
    emitters: EmitterDistribution,
    tuning: TuningRange,
    mode_energies: np.ndarray,
    q_factor: float,
    seed: int,
    trial: int,
) -> bool:
    rng = trial_rng(seed, trial)
    e_qd = emitters.sample(rng)
    shift = emitters.sample_fab_shift_ev(rng)
    if not e_qd > cavity.e_2d_ev:
        return False
    e_mode = float(mode_energies[int(np.argmin(np.abs(mode_energies - e_qd)))]) + shift
    half_linewidth = e_qd / (2.0 * q_factor)
    return tuning.min_abs_detuning_ev(e_qd - e_mode) < half_linewidth


def estimate_yield(
    cavity: PlanarCavity,
    emitters: EmitterDistribution,
    tuning: TuningRange,
    diameter_grid_um: Sequence[float],
    trials: int,
    seed: int,
    mode: ModeIndex = FUNDAMENTAL,
    q_factor: float = 1438.0,
    confidence: float = 0.95,
    threads: int = 1,
) -> YieldEstimate:
    """
    Fraction of devices that can be tuned into resonance.

    Each trial draws an emitter energy, picks the closest grid pillar,
    shifts its mode by the fabrication noise and checks whether some
    temperature in the tuning window brings |E_QD - E_mode| below E/(2Q).
    Trial k uses its own random stream derived from (seed, k), so the
    result does not depend on `threads`.
    """
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    if not q_factor > 0:
        raise ArgumentError(f"q_factor must be > 0, got {q_factor}")
    grid = np.sort(np.asarray(diameter_grid_um, dtype=float).ravel())
    if grid.size == 0 or not np.all(grid > 0):
        raise ArgumentError("diameter grid must be non-empty with positive values")

    energies = _mode_energies(cavity, mode, _radius_nm(grid))

    def run(trial: int) -> bool:
        return _yield_trial(cavity, emitters, tuning, energies, q_factor, seed, trial)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, range(trials)))
    else:
        outcomes = [run(k) for k in range(trials)]

    successes = int(sum(outcomes))
    p = successes / trials
    interval = stats.binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="exact")
    estimate = YieldEstimate(
        successes=successes,
        trials=trials,
        yield_fraction=p,
        standard_error=math.sqrt(p * (1.0 - p) / trials),
        ci_low=float(interval.low),
        ci_high=float(interval.high),
        confidence=confidence,
    )
    logger.info(f"Yield {successes}/{trials} = {p:.3f} [{estimate.ci_low:.3f}, {estimate.ci_high:.3f}]")
    return estimate
