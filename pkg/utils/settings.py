"""
Project defaults for DotFoundry.

config.yaml carries the numeric defaults every command falls back on: fit
tolerances, imaging and localization parameters, cavity constants, the
laser repetition rate, output precision and logging. Run configs (JSON)
override them per run.
"""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Union

import yaml

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class Settings:
    """Project defaults from config.yaml, merged over built-in values."""

    def __init__(self, config_path: Union[str, Path] = "config.yaml"):
        self.config_path = Path(config_path)
        self.config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self) -> None:
        """
        Merge config.yaml over the built-in defaults. A missing file is
        created from the defaults; an unreadable one is logged and ignored.
        """
        defaults = self._default_config()
        if not self.config_path.exists():
            self.config = defaults
            self.save_config()
            return
        try:
            loaded = yaml.safe_load(self.config_path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Ignoring {self.config_path}, using built-in defaults: {e}")
            self.config = defaults
            return
        if not isinstance(loaded, dict):
            logger.error(f"Ignoring {self.config_path}: top level must be a mapping")
            self.config = defaults
            return
        self.config = _merge(defaults, loaded)
        logger.debug(f"Loaded project defaults from {self.config_path}")

    def save_config(self) -> None:
        """Write the current defaults back to config.yaml."""
        try:
            self.config_path.parent.mkdir(parents=True, exist_ok=True)
            self.config_path.write_text(
                yaml.safe_dump(self.config, default_flow_style=False, sort_keys=False), encoding="utf-8"
            )
        except OSError as e:
            logger.error(f"Could not write {self.config_path}: {e}")

    def _default_config(self) -> Dict[str, Any]:
        """Built-in values for every section of config.yaml."""
        return {
            "fit": {
                "ftol": 1e-10,
                "xtol": 1e-10,
                "gtol": 1e-6,
                "max_iterations": 200,
                "initial_damping": 1e-3,
                "damping_increase": 10.0,
                "damping_decrease": 0.1
            },
            "imaging": {
                "supersample": 3,
                "adc_max": 65535
            },
            "localization": {
                "averaging_halfwidth_px": 2,
                "box_blur_px": 3,
                "emitter_fit_halfwidth_nm": 2000.0,
                "mark_fit_halfwidth_nm": 1400.0,
                "mark_cut_offset_nm": 1100.0,
                "poisson_weighting": True,
                "include_calibration_uncertainty": True,
                "histogram_bin_width_nm": 2.0
            },
            "cavity": {
                "epsilon_eff": 11.9,
                "e_2d_ev": 1.3477,
                "stopband_low_nm": 870.0,
                "stopband_high_nm": 980.0,
                "grid_min_um": 1.0,
                "grid_max_um": 6.0,
                "grid_step_um": 0.5,
                "q_factor": 1438.0,
                "dE_dT_qd_meV_per_K": -0.05,
                "dE_dT_mode_meV_per_K": -0.01
            },
            "photon_stats": {
                "rep_rate_hz": 79.3e6,
                "side_peaks_per_side": 2
            },
            "output": {
                "significant_digits": 9
            },
            "logging": {
                "level": "INFO",
                "file": None
            }
        }

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Look up a dotted key such as "localization.box_blur_px"; missing or
        null entries give `default`.
        """
        node: Any = self.config
        for key in key_path.split("."):
            if not isinstance(node, dict) or node.get(key) is None:
                return default
            node = node[key]
        return node

    def set(self, key_path: str, value: Any) -> None:
        """Store a dotted key, e.g. set("cavity.epsilon_eff", 12.5), and save."""
        *sections, leaf = key_path.split(".")
        node = self.config
        for key in sections:
            node = node.setdefault(key, {})
        node[leaf] = value
        self.save_config()

    def fit_options(self) -> Dict[str, Any]:
        """Keyword arguments for services.fit_engine.fit."""
        return dict(self.get("fit", {}))

    def get_epsilon_eff(self) -> float:
        """Effective dielectric constant of the pillar."""
        return float(self.get("cavity.epsilon_eff", 11.9))

    def get_log_level(self) -> str:
        return str(self.get("logging.level", "INFO")).upper()

    def set_log_level(self, level: str) -> None:
        """Unknown level names are ignored."""
        if level.upper() in LOG_LEVELS:
            self.set("logging.level", level.upper())

    def get_significant_digits(self) -> int:
        """Significant digits used for floats in JSON output."""
        return int(self.get("output.significant_digits", 9))

    def get_rep_rate_hz(self) -> float:
        """Laser repetition rate used when a run config does not give one."""
        return float(self.get("photon_stats.rep_rate_hz", 79.3e6))


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively overlay `override` onto a copy of `base`."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged
