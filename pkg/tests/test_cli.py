"""
Tests for the dotfoundry command line.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _noiseless_scene_config() -> dict:
    mark = {"arm_length_nm": 3600.0, "arm_width_nm": 400.0, "reflectance_counts": 320.0, "edge_blur_nm": 250.0}
    return {
        "frame": {"width_px": 128, "height_px": 128, "pixel_pitch_nm": 100.0},
        "emitter": {"x_nm": 6050.0, "y_nm": 8050.0, "peak_counts": 1000.0, "psf_fwhm_nm": 1000.0, "profile": "Gaussian"},
        "marks": [
            dict(mark, name="A", center_x_nm=2550.0, center_y_nm=2550.0),
            dict(mark, name="B", center_x_nm=10050.0, center_y_nm=2550.0),
        ],
        "known_separation_nm": 7500.0,
        "noise": {"photon_shot": False},
        "seed": 5,
    }


def _write_json(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def run(tmp_path: Path):
    """Invoke the CLI with settings kept in the temporary directory."""
    settings = str(tmp_path / "config.yaml")

    def invoke(*argv: str) -> int:
        return main(["--settings", settings, *argv])

    return invoke


class TestSimulateAndLocalize:
    def test_noiseless_round_trip(self, run, tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
        config = _write_json(tmp_path / "scene.json", _noiseless_scene_config())
        frames = tmp_path / "frames"

        assert run("simulate-frame", str(config), "--output-dir", str(frames)) == 0
        truth = json.loads(capsys.readouterr().out)
        assert truth["true_separation_nm"] == {"x": 3500.0, "y": 5500.0}
        assert truth["seed"] == 5

        report_path = tmp_path / "report.json"
        code = run(
            "localize",
            "--surface", str(frames / "surface.pgm"),
            "--emitter", str(frames / "emitter.pgm"),
            "--layout", str(frames / "layout.json"),
            "--output", str(report_path),
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["separations"]["x"]["delta_nm"] == pytest.approx(3500.0, abs=10.0)
        assert report["separations"]["y"]["delta_nm"] == pytest.approx(5500.0, abs=10.0)
        assert report["calibration"]["nm_per_px"] == pytest.approx(100.0, rel=1e-3)

    def test_same_seed_gives_identical_files(self, run, tmp_path: Path) -> None:
        config = SCENARIOS / "two_color_scene.json"
        assert run("simulate-frame", str(config), "--output-dir", str(tmp_path / "a")) == 0
        assert run("simulate-frame", str(config), "--output-dir", str(tmp_path / "b")) == 0

        for name in ("surface.pgm", "emitter.pgm", "scene.json", "layout.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_flag_overrides_config(self, run, tmp_path: Path) -> None:
        config = SCENARIOS / "two_color_scene.json"
        run("simulate-frame", str(config), "--output-dir", str(tmp_path / "a"))
        run("simulate-frame", str(config), "--output-dir", str(tmp_path / "b"), "--seed", "1")

        assert (tmp_path / "a" / "surface.pgm").read_bytes() != (tmp_path / "b" / "surface.pgm").read_bytes()
        assert json.loads((tmp_path / "b" / "scene.json").read_text())["seed"] == 1

    def test_invalid_pitch_is_config_error(self, run, tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
        data = _noiseless_scene_config()
        data["frame"]["pixel_pitch_nm"] = 0.0

        assert run("simulate-frame", str(_write_json(tmp_path / "scene.json", data))) == 2
        assert "frame.pixel_pitch_nm" in capsys.readouterr().err

    def test_missing_frame_is_runtime_error(self, run, tmp_path: Path) -> None:
        layout = _write_json(
            tmp_path / "layout.json",
            {
                "marks": [
                    {"name": "A", "center_x_nm": 2550.0, "center_y_nm": 2550.0},
                    {"name": "B", "center_x_nm": 10050.0, "center_y_nm": 2550.0},
                ],
                "known_separation_nm": 7500.0,
            },
        )
        code = run(
            "localize",
            "--surface", str(tmp_path / "missing.pgm"),
            "--emitter", str(tmp_path / "missing.pgm"),
            "--layout", str(layout),
        )
        assert code == 1

    def test_localize_needs_all_inputs(self, run, tmp_path: Path) -> None:
        assert run("localize", "--surface", str(tmp_path / "s.pgm")) == 2

    def test_batch_writes_summary(self, run, tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
        out = tmp_path / "batch"
        code = run(
            "localize", "--scenes", "2", "--config", str(SCENARIOS / "two_color_scene.json"), "--output-dir", str(out)
        )

        assert code == 0
        summary = json.loads((out / "uncertainty_summary.json").read_text())
        assert summary["completed"] == 2
        assert set(summary["categories"]) == {"emitter", "mark", "separation"}
        assert (out / "scenes" / "scene_001.json").exists()
        header = (out / "uncertainty_histogram.csv").read_text().splitlines()[0]
        assert header == "category,bin_left_nm,count"
        assert "2/2 scenes localized" in capsys.readouterr().out


class TestDesign:
    def test_design_from_flag(self, run, tmp_path: Path) -> None:
        assert run("design", "--target-nm", "915.01", "--output-dir", str(tmp_path)) == 0

        design = json.loads((tmp_path / "design.json").read_text())["design"]
        assert design["target_wavelength_nm"] == pytest.approx(915.01)
        assert design["mode"]["label"] == "HE11"
        assert (tmp_path / "mode_curve.csv").read_text().startswith("diameter_um,energy_eV,wavelength_nm\n")

    def test_design_from_scenario(self, run, tmp_path: Path) -> None:
        assert run("design", "--config", str(SCENARIOS / "design_915nm.json"), "--output-dir", str(tmp_path)) == 0

        design = json.loads((tmp_path / "design.json").read_text())["design"]
        steps = (design["diameter_um"] - 1.0) / 0.05
        assert steps == pytest.approx(round(steps), abs=1e-6)

    def test_infeasible_target(self, run, tmp_path: Path) -> None:
        assert run("design", "--target-nm", "950", "--output-dir", str(tmp_path)) == 2

    def test_design_needs_a_target(self, run, tmp_path: Path) -> None:
        assert run("design", "--output-dir", str(tmp_path)) == 2


class TestCharacterize:
    def test_efficiency_from_scenario(self, run, tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
        code = run("characterize", str(SCENARIOS / "characterize_780nm.json"), "--output-dir", str(tmp_path))

        assert code == 0
        report = json.loads((tmp_path / "source_report.json").read_text())["report"]
        assert report["extraction_efficiency"]["value"] == pytest.approx(0.65, abs=0.01)
        assert report["g2_zero"]["value"] == 0.205
        assert "extraction efficiency" in capsys.readouterr().out

    def test_budget_file_and_histogram(self, run, tmp_path: Path) -> None:
        hist_config = _write_json(tmp_path / "hist.json", {"g2_target": 0.144, "total_pairs": 40000.0, "seed": 3})
        assert run("simulate-histogram", str(hist_config), "--output-dir", str(tmp_path)) == 0

        config = _write_json(
            tmp_path / "characterize.json",
            {
                "histogram": "histogram.csv",
                "budget_path": str(SCENARIOS / "detection_budget.json"),
                "detected_counts_per_s": 1657000.0,
            },
        )
        assert run("characterize", str(config), "--output-dir", str(tmp_path / "out")) == 0

        document = json.loads((tmp_path / "out" / "source_report.json").read_text())
        assert document["report"]["budget"]["overall"]["transmission"] == pytest.approx(0.027452, abs=5e-6)
        assert document["analyses"]["g2"]["g2"] == pytest.approx(0.144, abs=0.05)

    def test_spectrum_fit_is_written(self, run, tmp_path: Path) -> None:
        wavelength = np.arange(913.0, 917.0, 0.01)
        counts = 20.0 + 1000.0 * 0.3**2 / ((wavelength - 915.01) ** 2 + 0.3**2)
        rows = "\n".join(f"{w:.2f},{c:.6f}" for w, c in zip(wavelength, counts))
        (tmp_path / "spectrum.csv").write_text("wavelength_nm,counts\n" + rows + "\n")
        config = _write_json(tmp_path / "characterize.json", {"spectrum": "spectrum.csv"})

        assert run("characterize", str(config), "--output-dir", str(tmp_path / "out")) == 0
        lines = (tmp_path / "out" / "spectrum_fit.csv").read_text().splitlines()
        assert lines[0] == "wavelength_nm,counts,fit_counts"
        assert len(lines) == len(wavelength) + 1
        _, measured, fitted = (float(v) for v in lines[len(lines) // 2].split(","))
        assert fitted == pytest.approx(measured, rel=1e-3)

    def test_flat_spectrum_is_runtime_error(self, run, tmp_path: Path) -> None:
        rows = "\n".join(f"{915.0 + 0.01 * i:.2f},50" for i in range(40))
        (tmp_path / "spectrum.csv").write_text("wavelength_nm,counts\n" + rows + "\n")
        config = _write_json(tmp_path / "characterize.json", {"spectrum": "spectrum.csv"})

        assert run("characterize", str(config), "--output-dir", str(tmp_path / "out")) == 1

    def test_malformed_csv_is_runtime_error(self, run, tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
        (tmp_path / "cavity.csv").write_text("time_ps,counts\n0,10\n16,oops\n")
        config = _write_json(tmp_path / "characterize.json", {"cavity_trace": "cavity.csv"})

        assert run("characterize", str(config), "--output-dir", str(tmp_path / "out")) == 1
        assert "line 3" in capsys.readouterr().err

    def test_unknown_key_is_config_error(self, run, tmp_path: Path) -> None:
        config = _write_json(tmp_path / "characterize.json", {"g2": 0.2})
        assert run("characterize", str(config)) == 2


class TestHistogramAndYield:
    def test_histogram_seed_from_environment(self, run, tmp_path: Path, mock_env_vars, capsys) -> None:
        config = _write_json(tmp_path / "hist.json", {"g2_target": 0.2})

        assert run("simulate-histogram", str(config), "--output-dir", str(tmp_path)) == 0
        assert "4242" in capsys.readouterr().out
        assert (tmp_path / "histogram.csv").exists()
        assert (tmp_path / "histogram.json").exists()

    def test_yield_is_reproducible(self, run, tmp_path: Path) -> None:
        config = str(SCENARIOS / "yield_sweep.json")
        assert run("yield", config, "--trials", "30", "--output-dir", str(tmp_path / "a")) == 0
        assert run("yield", config, "--trials", "30", "--threads", "3", "--output-dir", str(tmp_path / "b")) == 0

        first = (tmp_path / "a" / "yield.json").read_bytes()
        assert first == (tmp_path / "b" / "yield.json").read_bytes()
        result = json.loads(first)
        assert result["seed"] == 2017
        assert result["yield"]["trials"] == 30


def test_usage_error_exits_2(run) -> None:
    with pytest.raises(SystemExit) as excinfo:
        run("no-such-command")
    assert excinfo.value.code == 2
