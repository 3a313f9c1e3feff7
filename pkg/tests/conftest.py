"""
Pytest configuration and fixtures.
"""

import pytest
import numpy as np
from pathlib import Path

from services.imaging import EmitterProfile, EmitterSpec, FrameGeometry, MarkSpec, NoiseSpec, SceneSpec
from services.localization import MarkLayout, MarkWindow
from utils.settings import Settings


@pytest.fixture
def temp_dir(tmp_path: Path) -> Path:
    """Create a temporary directory for tests."""
    return tmp_path


@pytest.fixture
def settings(tmp_path: Path) -> Settings:
    """Default settings backed by a throwaway config file."""
    return Settings(config_path=str(tmp_path / "config.yaml"))


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test data."""
    return np.random.default_rng(12345)


@pytest.fixture
def mock_env_vars(monkeypatch: pytest.MonkeyPatch) -> None:
    """Set up mock environment variables."""
    monkeypatch.setenv("DOTFOUNDRY_SEED", "4242")


@pytest.fixture
def no_seed_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Make sure no seed leaks in from the environment."""
    monkeypatch.delenv("DOTFOUNDRY_SEED", raising=False)


def make_mark(name: str, x_nm: float, y_nm: float, **overrides) -> MarkSpec:
    values = dict(
        center_x_nm=x_nm,
        center_y_nm=y_nm,
        arm_length_nm=3600.0,
        arm_width_nm=400.0,
        reflectance_counts=320.0,
        edge_blur_nm=250.0,
        name=name,
    )
    values.update(overrides)
    return MarkSpec(**values)


@pytest.fixture
def noiseless_geometry() -> FrameGeometry:
    return FrameGeometry(width=128, height=128, pixel_pitch_nm=100.0)


@pytest.fixture
def noiseless_scene() -> SceneSpec:
    """
    Every feature sits on a pixel center and nothing is defocused, so each
    line cut is symmetric about its true center.
    """
    emitter = EmitterSpec(6050.0, 8050.0, peak_counts=1000.0, psf_fwhm_nm=1000.0, profile=EmitterProfile.GAUSSIAN)
    return SceneSpec(
        emitter=emitter,
        marks=(make_mark("A", 2550.0, 2550.0), make_mark("B", 10050.0, 2550.0)),
        background_counts=0.0,
    )


@pytest.fixture
def noiseless_layout() -> MarkLayout:
    return MarkLayout(
        (MarkWindow("A", 2550.0, 2550.0), MarkWindow("B", 10050.0, 2550.0)),
        known_separation_nm=7500.0,
    )


@pytest.fixture
def camera_geometry() -> FrameGeometry:
    return FrameGeometry(width=128, height=128, pixel_pitch_nm=120.0)


@pytest.fixture
def camera_scene() -> SceneSpec:
    """Two-color scene with a dim Lorentzian emitter and defocused planes."""
    emitter = EmitterSpec(5500.0, 6500.0, peak_counts=600.0, psf_fwhm_nm=1000.0)
    return SceneSpec(
        emitter=emitter,
        marks=(make_mark("A", 2500.0, 2500.0), make_mark("B", 12500.0, 2500.0)),
        background_counts=180.0,
        surface_defocus_nm=1500.0,
        emitter_defocus_nm=1000.0,
    )


@pytest.fixture
def camera_layout() -> MarkLayout:
    return MarkLayout(
        (MarkWindow("A", 2500.0, 2500.0), MarkWindow("B", 12500.0, 2500.0)),
        known_separation_nm=10000.0,
    )


@pytest.fixture
def camera_noise() -> NoiseSpec:
    return NoiseSpec(photon_shot=True, emccd_gain=10.0, read_noise_rms=5.0, seed=2017)


@pytest.fixture
def detection_budget_elements():
    """The measured transmission of every element in the detection path."""
    return [
        ("optical window", 0.929, 0.03),
        ("50x microscope objective", 0.787, 0.03),
        ("50/50 beam splitter", 0.490, 0.03),
        ("50/50 beam splitter", 0.490, 0.03),
        ("silver mirror", 0.956, 0.03),
        ("920 nm band-pass + 900 nm long-pass", 0.568, 0.02),
        ("coupling lens", 0.960, 0.03),
        ("single-photon detector", 0.300, 0.05),
    ]
