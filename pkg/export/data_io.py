"""
Measurement data files: CSV traces, histograms, spectra and saturation
series, plus JSON documents.

CSV files have a header row. Histograms carry a JSON sidecar
{"rep_period_ns": ..., "bin_width_ns": ...} next to the CSV. Parse errors
report the file line (header = line 1).
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from export.report_writer import ReportWriter
from services.localization import UNCERTAINTY_CATEGORIES, UncertaintyHistogram
from services.photon_stats import CoincidenceHistogram, DecayTrace, Spectrum
from utils.errors import ArgumentError, DataFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_json(path: PathLike) -> Dict[str, Any]:
    """Load a JSON object; syntax errors carry the line number."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataFormatError(e.msg, path=str(path), line=e.lineno) from e
    if not isinstance(data, dict):
        raise DataFormatError("expected a JSON object at the top level", path=str(path), line=1)
    return data


def read_columns(path: PathLike, required: Sequence[str], optional: Sequence[str] = ()) -> Dict[str, np.ndarray]:
    """
    Numeric columns of a CSV file.

    Raises:
        DataFormatError: unparsable file, missing column, or a non-numeric
            cell (reported with its line)
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, skipinitialspace=True, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DataFormatError("file is empty", path=str(path), line=1) from e
    except pd.errors.ParserError as e:
        raise DataFormatError(f"CSV parse error: {e}", path=str(path)) from e

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataFormatError(
            f"missing column(s) {', '.join(missing)}; found {', '.join(frame.columns)}", path=str(path), line=1
        )
    if frame.empty:
        raise DataFormatError("no data rows", path=str(path), line=2)

    columns = {}
    for name in list(required) + [c for c in optional if c in frame.columns]:
        values = pd.to_numeric(frame[name].str.strip(), errors="coerce").to_numpy(dtype=float, na_value=np.nan)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            row = int(bad[0])
            raise DataFormatError(
                f"column '{name}': cannot parse {frame[name].iloc[row]!r} as a number",
                path=str(path),
                line=row + 2,
            )
        columns[name] = values
    logger.debug(f"Read {len(frame)} rows from {path}")
    return columns


def _wrap(path: PathLike, build):
    """Domain validation errors of a loaded file become format errors."""
    try:
        return build()
    except ArgumentError as e:
        raise DataFormatError(str(e), path=str(path)) from e


def read_decay_trace(path: PathLike, description: str = "") -> DecayTrace:
    columns = read_columns(path, ["time_ps", "counts"])
    return _wrap(path, lambda: DecayTrace(columns["time_ps"], columns["counts"], description or Path(path).stem))


def write_decay_trace(trace: DecayTrace, path: PathLike, writer: Optional[ReportWriter] = None) -> Path:
    writer = writer or ReportWriter()
    return writer.write_csv({"time_ps": trace.time_ps, "counts": trace.counts}, path)


def histogram_sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def read_histogram(path: PathLike) -> CoincidenceHistogram:
    """CSV delay_ns,counts with its JSON sidecar."""
    columns = read_columns(path, ["delay_ns", "counts"])
    sidecar = histogram_sidecar_path(path)
    if not sidecar.exists():
        raise DataFormatError("histogram sidecar not found", path=str(sidecar))
    meta = read_json(sidecar)
    try:
        period = float(meta["rep_period_ns"])
        width = float(meta.get("bin_width_ns", np.median(np.diff(columns["delay_ns"]))))
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"invalid sidecar: {e}", path=str(sidecar)) from e
    return _wrap(path, lambda: CoincidenceHistogram(columns["delay_ns"], columns["counts"], period, width))


def write_histogram(hist: CoincidenceHistogram, path: PathLike, writer: Optional[ReportWriter] = None) -> Path:
    writer = writer or ReportWriter()
    writer.write_csv({"delay_ns": hist.delay_ns, "counts": hist.counts}, path)
    writer.write_json(
        {"rep_period_ns": hist.rep_period_ns, "bin_width_ns": hist.bin_width_ns}, histogram_sidecar_path(path)
    )
    return Path(path)


def read_spectrum(path: PathLike) -> Spectrum:
    """CSV with counts and either wavelength_nm or energy_ev."""
    columns = read_columns(path, ["counts"], optional=["wavelength_nm", "energy_ev"])
    if "wavelength_nm" in columns:
        axis, unit = columns["wavelength_nm"], "nm"
    elif "energy_ev" in columns:
        axis, unit = columns["energy_ev"], "eV"
    else:
        raise DataFormatError("spectrum needs a wavelength_nm or energy_ev column", path=str(path), line=1)
    order = np.argsort(axis, kind="stable")
    return _wrap(path, lambda: Spectrum(axis[order], columns["counts"][order], unit))


def write_spectrum(
    spectrum: Spectrum,
    path: PathLike,
    writer: Optional[ReportWriter] = None,
    fitted: Optional[Sequence[float]] = None,
) -> Path:
    """Spectrum CSV; `fitted` adds a fit_counts column on the same axis."""
    writer = writer or ReportWriter()
    axis_name = "wavelength_nm" if spectrum.unit == "nm" else "energy_ev"
    columns = {axis_name: spectrum.axis, "counts": spectrum.counts}
    if fitted is not None:
        if len(fitted) != len(spectrum.axis):
            raise ArgumentError("fitted curve must match the spectrum axis")
        columns["fit_counts"] = fitted
    return writer.write_csv(columns, path)


def read_saturation(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """(powers, counts_per_s) from a power,counts_per_s CSV."""
    columns = read_columns(path, ["power", "counts_per_s"])
    return columns["power"], columns["counts_per_s"]


def write_mode_curve(rows: List[Tuple[float, float, float]], path: PathLike, writer: Optional[ReportWriter] = None) -> Path:
    writer = writer or ReportWriter()
    return writer.write_rows(["diameter_um", "energy_eV", "wavelength_nm"], rows, path)


def write_uncertainty_histograms(
    histograms: Dict[str, UncertaintyHistogram], path: PathLike, writer: Optional[ReportWriter] = None
) -> Path:
    """One CSV row per (category, bin): category,bin_left_nm,count."""
    writer = writer or ReportWriter()
    rows = []
    for category in UNCERTAINTY_CATEGORIES:
        hist = histograms[category]
        rows.extend((category, float(left), int(count)) for left, count in zip(hist.bin_left_nm, hist.counts))
    return writer.write_rows(["category", "bin_left_nm", "count"], rows, path)
