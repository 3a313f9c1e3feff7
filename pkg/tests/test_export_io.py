"""
Tests for report writing and measurement data files.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from export import (
    ReportWriter,
    format_table,
    read_columns,
    read_decay_trace,
    read_histogram,
    read_json,
    read_saturation,
    read_spectrum,
    write_decay_trace,
    write_histogram,
    write_mode_curve,
    write_spectrum,
)
from services.histogram_simulator import SourceSpec, simulate_histogram
from services.photon_stats import DecayTrace, Spectrum
from utils.errors import ArgumentError, DataFormatError
from utils.measurements import Measurement


class TestReportWriter:
    def test_normalize(self) -> None:
        writer = ReportWriter(significant_digits=4)
        data = {
            "a": np.float64(1.23456789),
            "b": [np.int64(3), math.nan],
            "c": np.array([0.5, math.inf]),
            "m": Measurement(2.0, 0.1),
        }

        assert writer.normalize(data) == {"a": 1.235, "b": [3, None], "c": [0.5, None], "m": {"value": 2.0, "sigma": 0.1}}

    def test_json_is_byte_identical(self, temp_dir: Path) -> None:
        writer = ReportWriter()
        data = {"z": 1.0 / 3.0, "a": {"y": 2, "x": [1.5, 2.5]}}
        first = writer.write_json(data, temp_dir / "one.json").read_bytes()
        second = writer.write_json(dict(reversed(list(data.items()))), temp_dir / "two.json").read_bytes()

        assert first == second
        assert json.loads(first)["z"] == 0.333333333

    def test_csv_columns_keep_their_order(self, temp_dir: Path) -> None:
        path = ReportWriter(significant_digits=3).write_csv({"b": [1.23456, 2.0], "a": ["x", "y"]}, temp_dir / "t.csv")

        assert path.read_text() == "b,a\n1.23,x\n2,y\n"

    def test_mode_curve_header(self, temp_dir: Path) -> None:
        path = write_mode_curve([(2.0, 1.3547, 915.2)], temp_dir / "curve.csv")

        assert path.read_text().splitlines()[0] == "diameter_um,energy_eV,wavelength_nm"

    def test_invalid_digits(self) -> None:
        with pytest.raises(ValueError):
            ReportWriter(significant_digits=0)


def test_format_table() -> None:
    table = format_table([("eta", 0.650812), ("g2", 0.205)], header=["quantity", "value"])
    lines = table.splitlines()

    assert lines[0].split() == ["quantity", "value"]
    assert set(lines[1].replace(" ", "")) == {"-"}
    assert lines[2].split() == ["eta", "0.650812"]
    assert format_table([]) == ""


class TestDataFiles:
    def test_decay_trace_round_trip(self, temp_dir: Path) -> None:
        trace = DecayTrace(np.arange(0.0, 64.0, 16.0), np.array([10.0, 8.0, 6.0, 5.0]))
        loaded = read_decay_trace(write_decay_trace(trace, temp_dir / "cavity.csv"))

        np.testing.assert_array_equal(loaded.counts, trace.counts)
        assert loaded.description == "cavity"

    def test_bad_cell_reports_line(self, temp_dir: Path) -> None:
        path = temp_dir / "trace.csv"
        path.write_text("time_ps,counts\n0,10\n16,abc\n32,5\n")
        with pytest.raises(DataFormatError) as excinfo:
            read_columns(path, ["time_ps", "counts"])

        assert excinfo.value.line == 3
        assert "abc" in str(excinfo.value)

    def test_empty_cell_reports_line(self, temp_dir: Path) -> None:
        path = temp_dir / "trace.csv"
        path.write_text("time_ps,counts\n0,10\n16,8\n32,\n")
        with pytest.raises(DataFormatError) as excinfo:
            read_columns(path, ["time_ps", "counts"])

        assert excinfo.value.line == 4

    def test_missing_column(self, temp_dir: Path) -> None:
        path = temp_dir / "trace.csv"
        path.write_text("time,counts\n0,10\n")
        with pytest.raises(DataFormatError, match="time_ps") as excinfo:
            read_columns(path, ["time_ps", "counts"])

        assert excinfo.value.line == 1

    def test_empty_file(self, temp_dir: Path) -> None:
        path = temp_dir / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError):
            read_columns(path, ["time_ps"])

    def test_invalid_trace_becomes_format_error(self, temp_dir: Path) -> None:
        path = temp_dir / "trace.csv"
        path.write_text("time_ps,counts\n0,10\n0,8\n")
        with pytest.raises(DataFormatError, match="increasing"):
            read_decay_trace(path)

    def test_histogram_round_trip(self, temp_dir: Path) -> None:
        hist = simulate_histogram(SourceSpec(0.2), total_pairs=5000.0, seed=3)
        loaded = read_histogram(write_histogram(hist, temp_dir / "g2.csv"))

        np.testing.assert_array_equal(loaded.counts, hist.counts)
        assert loaded.rep_period_ns == pytest.approx(hist.rep_period_ns)
        assert (temp_dir / "g2.json").exists()

    def test_histogram_needs_sidecar(self, temp_dir: Path) -> None:
        hist = simulate_histogram(SourceSpec(0.2), total_pairs=5000.0, seed=3)
        path = write_histogram(hist, temp_dir / "g2.csv")
        (temp_dir / "g2.json").unlink()
        with pytest.raises(DataFormatError, match="sidecar"):
            read_histogram(path)

    def test_spectrum_in_energy(self, temp_dir: Path) -> None:
        path = temp_dir / "spectrum.csv"
        path.write_text("energy_ev,counts\n1.356,4\n1.354,2\n1.355,9\n")
        spectrum = read_spectrum(path)

        assert spectrum.unit == "eV"
        np.testing.assert_array_equal(spectrum.axis, [1.354, 1.355, 1.356])
        np.testing.assert_array_equal(spectrum.counts, [2, 9, 4])

    def test_spectrum_with_fit_column(self, temp_dir: Path) -> None:
        spectrum = Spectrum(np.array([915.0, 915.1, 915.2]), np.array([3.0, 9.0, 4.0]))
        path = write_spectrum(spectrum, temp_dir / "fit.csv", fitted=[3.5, 8.5, 4.5])

        assert path.read_text() == "wavelength_nm,counts,fit_counts\n915,3,3.5\n915.1,9,8.5\n915.2,4,4.5\n"
        np.testing.assert_array_equal(read_spectrum(path).counts, spectrum.counts)
        with pytest.raises(ArgumentError):
            write_spectrum(spectrum, temp_dir / "bad.csv", fitted=[1.0])

    def test_spectrum_needs_an_axis(self, temp_dir: Path) -> None:
        path = temp_dir / "spectrum.csv"
        path.write_text("channel,counts\n1,4\n")
        with pytest.raises(DataFormatError):
            read_spectrum(path)

    def test_saturation_series(self, temp_dir: Path) -> None:
        path = temp_dir / "sat.csv"
        path.write_text("power, counts_per_s\n0.5, 6.6e5\n1.0, 1.06e6\n2.0, 1.45e6\n")
        powers, counts = read_saturation(path)

        np.testing.assert_array_equal(powers, [0.5, 1.0, 2.0])
        assert counts[-1] == 1.45e6

    def test_read_json_reports_line(self, temp_dir: Path) -> None:
        path = temp_dir / "bad.json"
        path.write_text('{\n  "a": 1,\n  "b": \n}')
        with pytest.raises(DataFormatError) as excinfo:
            read_json(path)
        assert excinfo.value.line == 4
