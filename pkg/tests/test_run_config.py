"""
Tests for JSON run configurations.
"""

import json
from pathlib import Path

import pytest

from cli.run_config import (
    BudgetConfig,
    CharacterizeConfig,
    DesignConfig,
    HistogramConfig,
    SceneConfig,
    YieldConfig,
    from_dict,
    load_run_config,
    resolve_path,
)
from utils.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _scene(**overrides):
    data = {
        "emitter": {"x_nm": 5500, "y_nm": 6500, "peak_counts": 600},
        "marks": [
            {"name": "A", "center_x_nm": 2500, "center_y_nm": 2500},
            {"name": "B", "center_x_nm": 12500, "center_y_nm": 2500},
        ],
        "known_separation_nm": 10000,
    }
    data.update(overrides)
    return data


def test_scene_defaults() -> None:
    config = from_dict(SceneConfig, _scene())

    assert config.frame.pixel_pitch_nm == 120.0
    assert isinstance(config.emitter.x_nm, float)
    assert config.marks[1].name == "B"
    assert config.noise.photon_shot is True
    assert config.seed is None


def test_unknown_key_names_the_field() -> None:
    data = _scene(frame={"pixel_pitch": 120})
    with pytest.raises(ConfigError) as excinfo:
        from_dict(SceneConfig, data)
    assert excinfo.value.field == "frame.pixel_pitch"


def test_invalid_value_names_the_field() -> None:
    with pytest.raises(ConfigError) as excinfo:
        from_dict(SceneConfig, _scene(frame={"pixel_pitch_nm": 0}))
    assert excinfo.value.field == "frame.pixel_pitch_nm"


def test_list_items_are_indexed() -> None:
    data = _scene()
    data["marks"][1]["arm_width_nm"] = "wide"
    with pytest.raises(ConfigError) as excinfo:
        from_dict(SceneConfig, data)
    assert excinfo.value.field == "marks[1].arm_width_nm"


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"scenes": 2.5}, "scenes"),
        ({"noise": {"photon_shot": 1}}, "noise.photon_shot"),
        ({"known_separation_nm": True}, "known_separation_nm"),
        ({"marks": {"name": "A"}}, "marks"),
    ],
)
def test_type_errors(overrides, field) -> None:
    with pytest.raises(ConfigError) as excinfo:
        from_dict(SceneConfig, _scene(**overrides))
    assert excinfo.value.field == field


def test_missing_required_key() -> None:
    data = _scene()
    del data["emitter"]
    with pytest.raises(ConfigError, match="missing"):
        from_dict(SceneConfig, data)


def test_design_targets_are_exclusive() -> None:
    with pytest.raises(ConfigError) as excinfo:
        from_dict(DesignConfig, {"target_wavelength_nm": 915.0, "target_ev": 1.355})
    assert excinfo.value.field == "target_ev"


def test_characterize_window_shape() -> None:
    with pytest.raises(ConfigError) as excinfo:
        from_dict(CharacterizeConfig, {"lifetime_window_ps": [3000, 1000]})
    assert excinfo.value.field == "lifetime_window_ps"


def test_histogram_periods() -> None:
    with pytest.raises(ConfigError):
        from_dict(HistogramConfig, {"g2_target": 0.2, "n_periods": 2})


def test_load_reports_json_line(temp_dir: Path) -> None:
    path = temp_dir / "run.json"
    path.write_text('{\n  "g2_target": 0.2,\n  "seed": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_run_config(path, HistogramConfig)


def test_load_missing_file(temp_dir: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(temp_dir / "nope.json", HistogramConfig)


@pytest.mark.parametrize(
    "name, cls",
    [
        ("two_color_scene.json", SceneConfig),
        ("characterize_780nm.json", CharacterizeConfig),
        ("characterize_858nm.json", CharacterizeConfig),
        ("design_915nm.json", DesignConfig),
        ("histogram_recapture.json", HistogramConfig),
        ("yield_sweep.json", YieldConfig),
        ("detection_budget.json", BudgetConfig),
    ],
)
def test_shipped_scenarios_load(name: str, cls: type) -> None:
    assert isinstance(load_run_config(SCENARIOS / name, cls), cls)


def test_resolve_path(temp_dir: Path) -> None:
    config = temp_dir / "runs" / "run.json"

    assert resolve_path(config, "data/trace.csv") == temp_dir / "runs" / "data" / "trace.csv"
    assert resolve_path(config, str(temp_dir / "abs.csv")) == temp_dir / "abs.csv"
    assert resolve_path(config, None) is None


def test_round_trips_through_json(temp_dir: Path) -> None:
    path = temp_dir / "yield.json"
    path.write_text(json.dumps({"emitters": {"low_ev": 1.35, "high_ev": 1.36}, "trials": 10}))
    config = load_run_config(path, YieldConfig)

    assert config.emitters.kind == "uniform"
    assert config.tuning.t_max_k == 40.0
