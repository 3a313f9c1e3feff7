"""
Tests for PGM frame files and their metadata sidecars.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from services.frame_io import read_frame, sidecar_path, write_frame
from services.imaging import Frame, FrameGeometry, NoiseSpec, render_frame
from utils.errors import ArgumentError, DataFormatError


def _frame() -> Frame:
    pixels = np.arange(12, dtype=float).reshape(3, 4) * 5000.0
    return Frame(np.clip(pixels, 0, 65535), pixel_pitch_nm=120.0, exposure_s=0.25)


def test_round_trip_is_lossless(temp_dir: Path) -> None:
    frame = _frame()
    path = write_frame(frame, temp_dir / "frame.pgm")
    loaded = read_frame(path)

    assert loaded == frame
    assert loaded.pixel_pitch_nm == 120.0
    assert loaded.exposure_s == 0.25


def test_rendered_frame_round_trip(temp_dir: Path, camera_scene, camera_geometry, camera_noise) -> None:
    frame = render_frame(camera_scene, camera_noise, camera_geometry)
    loaded = read_frame(write_frame(frame, temp_dir / "noisy.pgm"))

    np.testing.assert_array_equal(loaded.pixels, frame.pixels)


def test_header_and_sidecar_layout(temp_dir: Path) -> None:
    path = write_frame(_frame(), temp_dir / "frame.pgm")
    data = path.read_bytes()

    assert data.startswith(b"P5\n4 3\n65535\n")
    assert len(data) == len(b"P5\n4 3\n65535\n") + 4 * 3 * 2
    assert json.loads(sidecar_path(path).read_text()) == {"exposure_s": 0.25, "pixel_pitch_nm": 120.0}


def test_fractional_pixels_need_quantize(temp_dir: Path) -> None:
    frame = Frame(np.full((2, 2), 1.4), 100.0)
    with pytest.raises(ArgumentError):
        write_frame(frame, temp_dir / "frac.pgm")

    loaded = read_frame(write_frame(frame, temp_dir / "frac.pgm", quantize=True))
    assert np.all(loaded.pixels == 1.0)


def test_reads_8bit_with_comments(temp_dir: Path) -> None:
    path = temp_dir / "small.pgm"
    path.write_bytes(b"P5\n# written by hand\n3 2\n255\n" + bytes([0, 10, 20, 30, 40, 255]))
    sidecar_path(path).write_text('{"pixel_pitch_nm": 80}')
    frame = read_frame(path)

    assert frame.pixels.tolist() == [[0, 10, 20], [30, 40, 255]]
    assert frame.pixel_pitch_nm == 80.0
    assert frame.exposure_s == 0.1


def test_truncated_data(temp_dir: Path) -> None:
    path = temp_dir / "short.pgm"
    path.write_bytes(b"P5\n4 4\n65535\n" + b"\x00" * 10)
    sidecar_path(path).write_text('{"pixel_pitch_nm": 100}')
    with pytest.raises(DataFormatError) as excinfo:
        read_frame(path)
    assert excinfo.value.path == str(path)


def test_not_an_image(temp_dir: Path) -> None:
    path = temp_dir / "bad.pgm"
    path.write_bytes(b"XY not an image at all")
    with pytest.raises(DataFormatError) as excinfo:
        read_frame(path)
    assert excinfo.value.offset == 0


def test_color_image_is_rejected(temp_dir: Path) -> None:
    path = temp_dir / "color.ppm"
    path.write_bytes(b"P6\n1 1\n255\n" + bytes([1, 2, 3]))
    sidecar_path(path).write_text('{"pixel_pitch_nm": 100}')
    with pytest.raises(DataFormatError, match="grayscale"):
        read_frame(path)


def test_missing_sidecar(temp_dir: Path) -> None:
    path = temp_dir / "lonely.pgm"
    path.write_bytes(b"P5\n1 1\n255\n\x07")
    with pytest.raises(DataFormatError, match="sidecar"):
        read_frame(path)


def test_invalid_sidecar_json_reports_line(temp_dir: Path) -> None:
    path = temp_dir / "frame.pgm"
    path.write_bytes(b"P5\n1 1\n255\n\x07")
    sidecar_path(path).write_text('{\n  "pixel_pitch_nm": ,\n}')
    with pytest.raises(DataFormatError) as excinfo:
        read_frame(path)
    assert excinfo.value.line == 2


def test_missing_file_is_os_error(temp_dir: Path) -> None:
    with pytest.raises(OSError):
        read_frame(temp_dir / "nope.pgm")
