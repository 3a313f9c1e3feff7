"""
Run configuration - one JSON file per command run.

Each command has a dataclass tree mirroring its module inputs. Unknown keys
are rejected and every validation error names the offending field with its
dotted path (e.g. "frame.pixel_pitch_nm"). Physical quantities carry their
unit in the key name.
"""

import json
import logging
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from utils.errors import ArgumentError, ConfigError

logger = logging.getLogger(__name__)


def _join(where: str, key: str) -> str:
    return f"{where}.{key}" if where else key


def _convert(hint: Any, value: Any, where: str) -> Any:
    origin = get_origin(hint)
    if origin is Union:
        args = [a for a in get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _convert(args[0], value, where)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError("expected a list", field=where)
        (item,) = get_args(hint)
        return [_convert(item, v, f"{where}[{i}]") for i, v in enumerate(value)]
    if is_dataclass(hint):
        return from_dict(hint, value, where)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", field=where)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=where)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=where)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=where)
        return value
    return value


def from_dict(cls: type, data: Any, where: str = "") -> Any:
    """Build a config dataclass from parsed JSON, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError("expected an object", field=where or cls.__name__)
    known = {f.name for f in fields(cls) if f.init}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", field=_join(where, key))
    hints = get_type_hints(cls)
    kwargs = {name: _convert(hints[name], value, _join(where, name)) for name, value in data.items()}
    try:
        config = cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"missing required key ({e})", field=where or cls.__name__) from e
    validate = getattr(config, "validate", None)
    if validate:
        validate(where)
    return config


def _require(condition: bool, message: str, where: str, key: str) -> None:
    if not condition:
        raise ConfigError(message, field=_join(where, key))


@dataclass
class FrameConfig:
    width_px: int = 128
    height_px: int = 128
    pixel_pitch_nm: float = 120.0
    exposure_s: float = 0.1
    supersample: int = 3

    def validate(self, where: str) -> None:
        _require(self.width_px > 0, "must be > 0", where, "width_px")
        _require(self.height_px > 0, "must be > 0", where, "height_px")
        _require(self.pixel_pitch_nm > 0, "must be > 0", where, "pixel_pitch_nm")
        _require(self.exposure_s > 0, "must be > 0", where, "exposure_s")
        _require(self.supersample >= 1, "must be >= 1", where, "supersample")


@dataclass
class EmitterConfig:
    x_nm: float
    y_nm: float
    peak_counts: float
    psf_fwhm_nm: float = 1000.0
    profile: str = "Lorentzian"

    def validate(self, where: str) -> None:
        _require(self.psf_fwhm_nm > 0, "must be > 0", where, "psf_fwhm_nm")
        _require(self.peak_counts >= 0, "must be >= 0", where, "peak_counts")
        _require(self.profile in ("Gaussian", "Lorentzian"), "must be Gaussian or Lorentzian", where, "profile")


@dataclass
class MarkConfig:
    name: str
    center_x_nm: float
    center_y_nm: float
    arm_length_nm: float = 3600.0
    arm_width_nm: float = 400.0
    reflectance_counts: float = 320.0
    edge_blur_nm: float = 250.0
    search_halfwidth_nm: float = 1500.0

    def validate(self, where: str) -> None:
        _require(self.arm_width_nm > 0, "must be > 0", where, "arm_width_nm")
        _require(self.arm_length_nm >= self.arm_width_nm, "must be >= arm_width_nm", where, "arm_length_nm")
        _require(self.edge_blur_nm >= 0, "must be >= 0", where, "edge_blur_nm")
        _require(self.search_halfwidth_nm > 0, "must be > 0", where, "search_halfwidth_nm")


@dataclass
class NoiseConfig:
    photon_shot: bool = True
    emccd_gain: float = 1.0
    read_noise_rms: float = 0.0

    def validate(self, where: str) -> None:
        _require(self.emccd_gain >= 1, "must be >= 1", where, "emccd_gain")
        _require(self.read_noise_rms >= 0, "must be >= 0", where, "read_noise_rms")


@dataclass
class SceneConfig:
    """simulate-frame and the localize batch driver."""
    emitter: EmitterConfig
    marks: List[MarkConfig]
    known_separation_nm: float
    frame: FrameConfig = field(default_factory=FrameConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    background_counts: float = 0.0
    surface_defocus_nm: float = 0.0
    emitter_defocus_nm: float = 0.0
    jitter_nm: float = 500.0
    scenes: int = 47
    seed: Optional[int] = None
    output_dir: str = "out"

    def validate(self, where: str) -> None:
        _require(len(self.marks) >= 2, "needs at least two marks", where, "marks")
        _require(self.known_separation_nm > 0, "must be > 0", where, "known_separation_nm")
        _require(self.background_counts >= 0, "must be >= 0", where, "background_counts")
        _require(self.surface_defocus_nm >= 0, "must be >= 0", where, "surface_defocus_nm")
        _require(self.emitter_defocus_nm >= 0, "must be >= 0", where, "emitter_defocus_nm")
        _require(self.jitter_nm >= 0, "must be >= 0", where, "jitter_nm")
        _require(self.scenes >= 1, "must be >= 1", where, "scenes")


@dataclass
class MarkWindowConfig:
    name: str
    center_x_nm: float
    center_y_nm: float
    search_halfwidth_nm: float = 1500.0


@dataclass
class LayoutConfig:
    marks: List[MarkWindowConfig]
    known_separation_nm: float

    def validate(self, where: str) -> None:
        _require(len(self.marks) >= 2, "needs at least two marks", where, "marks")
        _require(self.known_separation_nm > 0, "must be > 0", where, "known_separation_nm")


@dataclass
class ModeConfig:
    n_phi: int = 1
    n_r: int = 0

    def validate(self, where: str) -> None:
        _require(0 <= self.n_phi <= 11, "must be in 0..11", where, "n_phi")
        _require(0 <= self.n_r <= 10, "must be in 0..10", where, "n_r")


@dataclass
class GridConfig:
    min_um: float
    max_um: float
    step_um: float

    def validate(self, where: str) -> None:
        _require(self.min_um > 0, "must be > 0", where, "min_um")
        _require(self.max_um >= self.min_um, "must be >= min_um", where, "max_um")
        _require(self.step_um > 0, "must be > 0", where, "step_um")


@dataclass
class CavityConfig:
    e_2d_ev: Optional[float] = None
    epsilon_eff: Optional[float] = None
    stopband_low_nm: Optional[float] = None
    stopband_high_nm: Optional[float] = None

    def validate(self, where: str) -> None:
        if self.e_2d_ev is not None:
            _require(self.e_2d_ev > 0, "must be > 0", where, "e_2d_ev")
        if self.epsilon_eff is not None:
            _require(self.epsilon_eff > 1, "must be > 1", where, "epsilon_eff")


@dataclass
class DesignConfig:
    target_wavelength_nm: Optional[float] = None
    target_ev: Optional[float] = None
    cavity: CavityConfig = field(default_factory=CavityConfig)
    mode: ModeConfig = field(default_factory=ModeConfig)
    grid: Optional[GridConfig] = None
    diameters_um: Optional[List[float]] = None
    curve: Optional[GridConfig] = None
    seed: Optional[int] = None
    output_dir: str = "out"

    def validate(self, where: str) -> None:
        if self.target_wavelength_nm is not None:
            _require(self.target_wavelength_nm > 0, "must be > 0", where, "target_wavelength_nm")
        if self.target_ev is not None:
            _require(self.target_ev > 0, "must be > 0", where, "target_ev")
        _require(
            not (self.target_wavelength_nm is not None and self.target_ev is not None),
            "give either target_wavelength_nm or target_ev, not both",
            where,
            "target_ev",
        )
        if self.diameters_um is not None:
            _require(len(self.diameters_um) > 0, "must not be empty", where, "diameters_um")


@dataclass
class MeasurementConfig:
    value: float
    sigma: float = 0.0

    def validate(self, where: str) -> None:
        _require(self.sigma >= 0, "must be >= 0", where, "sigma")


@dataclass
class BudgetElementConfig:
    name: str
    transmission: float
    rel_err: float = 0.0

    def validate(self, where: str) -> None:
        _require(0 < self.transmission <= 1, "must be in (0, 1]", where, "transmission")
        _require(self.rel_err >= 0, "must be >= 0", where, "rel_err")


@dataclass
class CharacterizeConfig:
    cavity_trace: Optional[str] = None
    reference_trace: Optional[str] = None
    lifetime_window_ps: Optional[List[float]] = None
    spectrum: Optional[str] = None
    spectrum_window: Optional[List[float]] = None
    saturation: Optional[str] = None
    histogram: Optional[str] = None
    integration_halfwidth_ns: Optional[float] = None
    dip_halfwidth_ns: Optional[float] = None
    g2_zero: Optional[MeasurementConfig] = None
    budget: Optional[List[BudgetElementConfig]] = None
    budget_path: Optional[str] = None
    detected_counts_per_s: Optional[float] = None
    rep_rate_hz: Optional[float] = None
    pump_power_density_w_cm2: Optional[float] = None
    seed: Optional[int] = None
    output_dir: str = "out"

    def validate(self, where: str) -> None:
        for key in ("lifetime_window_ps", "spectrum_window"):
            window = getattr(self, key)
            if window is not None:
                _require(len(window) == 2 and window[0] < window[1], "must be [start, end]", where, key)
        _require(
            not (self.budget is not None and self.budget_path is not None),
            "give either budget or budget_path, not both",
            where,
            "budget_path",
        )
        if self.detected_counts_per_s is not None:
            _require(self.detected_counts_per_s > 0, "must be > 0", where, "detected_counts_per_s")
        if self.rep_rate_hz is not None:
            _require(self.rep_rate_hz > 0, "must be > 0", where, "rep_rate_hz")


@dataclass
class BudgetConfig:
    """A standalone budget file: {"elements": [...]}."""
    elements: List[BudgetElementConfig]

    def validate(self, where: str) -> None:
        _require(len(self.elements) > 0, "must not be empty", where, "elements")


@dataclass
class RecaptureConfig:
    delay_ns: float = 1.5
    fraction: float = 1.0

    def validate(self, where: str) -> None:
        _require(self.delay_ns >= 0, "must be >= 0", where, "delay_ns")
        _require(0 <= self.fraction <= 1, "must be in [0, 1]", where, "fraction")


@dataclass
class HistogramConfig:
    g2_target: float
    recapture: Optional[RecaptureConfig] = None
    rep_period_ns: Optional[float] = None
    peak_sigma_ns: float = 0.35
    total_pairs: float = 20000.0
    bin_width_ns: float = 0.1
    n_periods: int = 4
    seed: Optional[int] = None
    output_dir: str = "out"

    def validate(self, where: str) -> None:
        _require(self.g2_target >= 0, "must be >= 0", where, "g2_target")
        if self.rep_period_ns is not None:
            _require(self.rep_period_ns > 0, "must be > 0", where, "rep_period_ns")
        _require(self.peak_sigma_ns > 0, "must be > 0", where, "peak_sigma_ns")
        _require(self.total_pairs > 0, "must be > 0", where, "total_pairs")
        _require(self.bin_width_ns > 0, "must be > 0", where, "bin_width_ns")
        _require(self.n_periods >= 3, "must be >= 3", where, "n_periods")


@dataclass
class EmitterDistributionConfig:
    kind: str = "uniform"
    low_ev: Optional[float] = None
    high_ev: Optional[float] = None
    mean_ev: Optional[float] = None
    std_ev: Optional[float] = None
    fab_shift_std_meV: float = 0.0

    def validate(self, where: str) -> None:
        _require(self.kind in ("uniform", "normal"), "must be uniform or normal", where, "kind")
        _require(self.fab_shift_std_meV >= 0, "must be >= 0", where, "fab_shift_std_meV")


@dataclass
class TuningConfig:
    t_min_k: float = 4.0
    t_max_k: float = 40.0
    de_dt_qd_meV_per_k: Optional[float] = None
    de_dt_mode_meV_per_k: Optional[float] = None

    def validate(self, where: str) -> None:
        _require(self.t_max_k >= self.t_min_k, "must be >= t_min_k", where, "t_max_k")


@dataclass
class YieldConfig:
    emitters: EmitterDistributionConfig
    tuning: TuningConfig = field(default_factory=TuningConfig)
    cavity: CavityConfig = field(default_factory=CavityConfig)
    mode: ModeConfig = field(default_factory=ModeConfig)
    grid: Optional[GridConfig] = None
    trials: int = 1000
    q_factor: Optional[float] = None
    seed: Optional[int] = None
    output_dir: str = "out"

    def validate(self, where: str) -> None:
        _require(self.trials >= 1, "must be >= 1", where, "trials")
        if self.q_factor is not None:
            _require(self.q_factor > 0, "must be > 0", where, "q_factor")


def load_run_config(path: Union[str, Path], cls: type) -> Any:
    """
    Load a command's JSON run config.

    Relative file paths inside the config are resolved by the command
    against the config file's directory.

    Raises:
        ConfigError: unreadable file, invalid JSON, unknown keys or values
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path} at line {e.lineno}: {e.msg}") from e
    try:
        config = from_dict(cls, data)
    except ArgumentError as e:
        raise ConfigError(str(e)) from e
    logger.debug(f"Loaded {cls.__name__} from {path}")
    return config


def resolve_path(base: Union[str, Path], value: Optional[str]) -> Optional[Path]:
    """`value` relative to the directory of the config file `base`."""
    if value is None:
        return None
    candidate = Path(value)
    if candidate.is_absolute():
        return candidate
    return Path(base).parent / candidate
