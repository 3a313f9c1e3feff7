"""
Frame I/O - PGM images through Pillow with a JSON metadata sidecar.

Frames are written as 16-bit binary PGM (maxval 65535). Any grayscale
PGM Pillow can decode is accepted on read, 8-bit files included. The
sidecar lives next to the image with a .json suffix and holds
{"pixel_pitch_nm": ..., "exposure_s": ...}.
"""

import json
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from services.imaging import ADC_MAX, Frame
from utils.errors import ArgumentError, DataFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Pillow modes for 8-bit and 16-bit grayscale PGM
GRAYSCALE_MODES = ("L", "I", "I;16", "I;16B")


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_frame(frame: Frame, path: PathLike, quantize: bool = False) -> Path:
    """
    Write a frame as 16-bit PGM plus sidecar.

    Args:
        frame: Frame to write
        path: Image path; the sidecar goes to path.with_suffix(".json")
        quantize: Round and clip pixels to 0..65535 instead of refusing
            values that cannot be stored losslessly

    Returns:
        Path of the image file
    """
    path = Path(path)
    pixels = frame.pixels
    if quantize:
        pixels = np.clip(np.rint(pixels), 0, ADC_MAX)
    elif not np.array_equal(pixels, np.rint(pixels)) or float(np.max(pixels)) > ADC_MAX:
        raise ArgumentError(
            "frame has non-integer or >65535 pixel values; "
            "write with quantize=True to round them"
        )

    path.parent.mkdir(parents=True, exist_ok=True)
    # mode "I" is saved as big-endian 16-bit P5
    Image.fromarray(pixels.astype(np.int32)).save(path, format="PPM")

    metadata = {"pixel_pitch_nm": frame.pixel_pitch_nm, "exposure_s": frame.exposure_s}
    sidecar_path(path).write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {frame.width}x{frame.height} frame to {path}")
    return path


def read_frame(path: PathLike) -> Frame:
    """
    Read a PGM frame and its sidecar.

    Raises:
        FileNotFoundError: the image does not exist
        DataFormatError: not a grayscale PGM, truncated pixel data, or a
            missing or invalid sidecar
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"frame not found: {path}")
    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode not in GRAYSCALE_MODES:
                raise DataFormatError(
                    f"not a grayscale PGM file (format {image.format}, mode {image.mode})",
                    path=str(path),
                    offset=0,
                )
            image.load()
            pixels = np.asarray(image, dtype=np.float64)
    except UnidentifiedImageError as e:
        raise DataFormatError("not a PGM file", path=str(path), offset=0) from e
    except (OSError, ValueError) as e:
        raise DataFormatError(f"unreadable pixel data: {e}", path=str(path)) from e

    pitch, exposure = _read_sidecar(sidecar_path(path))
    logger.debug(f"Read {pixels.shape[1]}x{pixels.shape[0]} frame from {path}")
    try:
        return Frame(pixels, pitch, exposure)
    except ArgumentError as e:
        raise DataFormatError(str(e), path=str(sidecar_path(path))) from e


def _read_sidecar(path: Path) -> Tuple[float, float]:
    if not path.exists():
        raise DataFormatError("metadata sidecar not found", path=str(path))
    try:
        metadata = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataFormatError(e.msg, path=str(path), line=e.lineno) from e
    if not isinstance(metadata, dict) or "pixel_pitch_nm" not in metadata:
        raise DataFormatError("sidecar must hold an object with pixel_pitch_nm", path=str(path))
    try:
        return float(metadata["pixel_pitch_nm"]), float(metadata.get("exposure_s", 0.1))
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"invalid sidecar value: {e}", path=str(path)) from e
