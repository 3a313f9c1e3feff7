"""
Localization Service - emitter position relative to alignment marks.

Pipeline (two-color imaging):
1. Coarse detection: box blur, then argmax (global for the emitter, inside
   layout windows for the marks).
2. Line cuts through each feature, averaged over a transverse band.
3. 1D fits: Gaussian for mark arms (surface-focus frame), Lorentzian for the
   emitter (emitter-focus frame).
4. Pixel scale from two marks with a known separation.
5. Emitter-to-mark separations per axis with quadrature uncertainties.

Line-cut positions are pixel indices; index i is the pixel whose center is
at (i + 0.5) * pitch nm. Positions in nm are measured from the reference
mark's center.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from models.model_registry import ModelKind, ModelSpec
from services.fit_engine import FitOptions, FitResult, fit
from services.imaging import Frame
from utils.errors import (
    ArgumentError,
    BoundsError,
    DegenerateCalibrationError,
    DotFoundryError,
    FitFailure,
    StageError,
)
from utils.measurements import quadrature

logger = logging.getLogger(__name__)


class Axis(Enum):
    X = "X"
    Y = "Y"


class PeakModel(Enum):
    """Line-cut model; maps onto a fit engine model kind."""
    GAUSSIAN = "Gaussian"
    LORENTZIAN = "Lorentzian"

    @property
    def spec(self) -> ModelSpec:
        kind = ModelKind.GAUSSIAN_1D if self is PeakModel.GAUSSIAN else ModelKind.LORENTZIAN_1D
        return ModelSpec(kind)


@dataclass(frozen=True)
class LineCut:
    """A 1D profile through a frame."""
    axis: Axis
    fixed_index: int
    positions: np.ndarray
    values: np.ndarray
    averaging_halfwidth: int = 0

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        values = np.array(self.values, dtype=float)
        if positions.ndim != 1 or positions.shape != values.shape:
            raise ArgumentError("positions and values must be 1D of equal length")
        if positions.size > 1 and not np.all(np.diff(positions) > 0):
            raise ArgumentError("line-cut positions must be strictly increasing")
        positions.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "values", values)

    def window(self, center: float, halfwidth: float) -> "LineCut":
        """Samples with |position - center| <= halfwidth."""
        keep = np.abs(self.positions - center) <= halfwidth
        return replace(self, positions=self.positions[keep], values=self.values[keep])


@dataclass(frozen=True)
class Calibration:
    """Pixel scale inferred from two marks with a known separation."""
    nm_per_px: float
    sigma_nm_per_px: float
    source_marks: Tuple[str, str]
    known_separation_nm: float

    def __post_init__(self):
        if not self.nm_per_px > 0:
            raise ArgumentError(f"nm_per_px must be > 0, got {self.nm_per_px}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nm_per_px": self.nm_per_px,
            "sigma_nm_per_px": self.sigma_nm_per_px,
            "source_marks": list(self.source_marks),
            "known_separation_nm": self.known_separation_nm,
        }


@dataclass(frozen=True)
class PeakLocation:
    """Fitted peak center in pixels and, when calibrated, in nm."""
    center_px: float
    sigma_center_px: float
    center_nm: float
    sigma_center_nm: float
    model_used: PeakModel
    fit: FitResult
    axis: Axis = Axis.X

    def to_dict(self) -> Dict[str, Any]:
        return {
            "axis": self.axis.value,
            "center_px": self.center_px,
            "sigma_center_px": self.sigma_center_px,
            "center_nm": self.center_nm,
            "sigma_center_nm": self.sigma_center_nm,
            "model_used": self.model_used.value,
            "fit": self.fit.to_dict(),
        }


@dataclass(frozen=True)
class MarkLocation:
    """Both axes of one alignment mark."""
    name: str
    x: PeakLocation
    y: PeakLocation

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "x": self.x.to_dict(), "y": self.y.to_dict()}


@dataclass(frozen=True)
class Separation:
    """Emitter minus reference mark along one axis."""
    axis: Axis
    delta_nm: float
    sigma_nm: float

    def to_dict(self) -> Dict[str, Any]:
        return {"axis": self.axis.value, "delta_nm": self.delta_nm, "sigma_nm": self.sigma_nm}


@dataclass(frozen=True)
class LocalizationReport:
    """Result of localize(): emitter, marks, separations and calibration."""
    emitter_x: PeakLocation
    emitter_y: PeakLocation
    marks: Tuple[MarkLocation, ...]
    separations: Tuple[Separation, Separation]
    calibration: Calibration

    @property
    def reference_mark(self) -> MarkLocation:
        return self.marks[0]

    def separation(self, axis: Axis) -> Separation:
        return self.separations[0] if axis is Axis.X else self.separations[1]

    def emitter(self, axis: Axis) -> PeakLocation:
        return self.emitter_x if axis is Axis.X else self.emitter_y

    def to_dict(self) -> Dict[str, Any]:
        return {
            "emitter": {"x": self.emitter_x.to_dict(), "y": self.emitter_y.to_dict()},
            "marks": [m.to_dict() for m in self.marks],
            "separations": {s.axis.value.lower(): s.to_dict() for s in self.separations},
            "calibration": self.calibration.to_dict(),
        }


@dataclass(frozen=True)
class MarkWindow:
    """Nominal mark position [nm] and the search window around it."""
    name: str
    center_x_nm: float
    center_y_nm: float
    search_halfwidth_nm: float = 1500.0


@dataclass(frozen=True)
class MarkLayout:
    """
    Known mark positions. The first mark is the reference (origin); the
    first two define the calibration through known_separation_nm.
    """
    marks: Tuple[MarkWindow, ...]
    known_separation_nm: float

    def __post_init__(self):
        object.__setattr__(self, "marks", tuple(self.marks))
        if len(self.marks) < 2:
            raise ArgumentError("a mark layout needs at least two marks")
        if not self.known_separation_nm > 0:
            raise ArgumentError(f"known_separation_nm must be > 0, got {self.known_separation_nm}")

    @property
    def calibration_axis(self) -> Axis:
        a, b = self.marks[0], self.marks[1]
        dx = abs(b.center_x_nm - a.center_x_nm)
        dy = abs(b.center_y_nm - a.center_y_nm)
        return Axis.X if dx >= dy else Axis.Y


@dataclass(frozen=True)
class LocalizationOptions:
    """Tuning of the localization pipeline; lengths in nm are converted with the frame pitch."""
    averaging_halfwidth_px: int = 2
    box_blur_px: int = 3
    emitter_fit_halfwidth_nm: float = 2000.0
    mark_fit_halfwidth_nm: float = 1400.0
    mark_cut_offset_nm: float = 1100.0
    poisson_weighting: bool = True
    include_calibration_uncertainty: bool = True
    emitter_model: PeakModel = PeakModel.LORENTZIAN
    mark_model: PeakModel = PeakModel.GAUSSIAN
    fit_options: FitOptions = field(default_factory=FitOptions)

    @classmethod
    def from_settings(cls, settings: Any) -> "LocalizationOptions":
        section = settings.get("localization", {})
        return cls(
            averaging_halfwidth_px=int(section.get("averaging_halfwidth_px", 2)),
            box_blur_px=int(section.get("box_blur_px", 3)),
            emitter_fit_halfwidth_nm=float(section.get("emitter_fit_halfwidth_nm", 2000.0)),
            mark_fit_halfwidth_nm=float(section.get("mark_fit_halfwidth_nm", 1400.0)),
            mark_cut_offset_nm=float(section.get("mark_cut_offset_nm", 1100.0)),
            poisson_weighting=bool(section.get("poisson_weighting", True)),
            include_calibration_uncertainty=bool(section.get("include_calibration_uncertainty", True)),
            fit_options=FitOptions.from_settings(settings),
        )

    @property
    def peak_fit_options(self) -> FitOptions:
        return replace(self.fit_options, poisson_weighting=self.poisson_weighting)


def extract_line_cut(
    frame: Frame,
    axis: Axis,
    through_point: Tuple[int, int],
    averaging_halfwidth: int = 2,
) -> LineCut:
    """
    Line cut along `axis` through `through_point` = (column, row).

    values[i] is the mean over the 2*halfwidth+1 transverse band at
    longitudinal index i.

    Raises:
        BoundsError: the point or the averaging band leaves the frame
    """
    col, row = int(through_point[0]), int(through_point[1])
    if averaging_halfwidth < 0:
        raise ArgumentError(f"averaging_halfwidth must be >= 0, got {averaging_halfwidth}")
    if not (0 <= col < frame.width and 0 <= row < frame.height):
        raise BoundsError(f"point ({col}, {row}) outside {frame.width}x{frame.height} frame")

    h = averaging_halfwidth
    if axis is Axis.X:
        if row - h < 0 or row + h >= frame.height:
            raise BoundsError(f"averaging rows {row - h}..{row + h} leave the frame")
        values = frame.pixels[row - h:row + h + 1, :].mean(axis=0)
        fixed = row
    else:
        if col - h < 0 or col + h >= frame.width:
            raise BoundsError(f"averaging columns {col - h}..{col + h} leave the frame")
        values = frame.pixels[:, col - h:col + h + 1].mean(axis=1)
        fixed = col
    positions = np.arange(values.size, dtype=float)
    return LineCut(axis, fixed, positions, values, h)


def locate_peak(
    cut: LineCut,
    model: PeakModel,
    calib: Optional[Calibration] = None,
    origin_px: float = 0.0,
    options: Optional[FitOptions] = None,
) -> PeakLocation:
    """
    Fit a peak model to a line cut.

    Args:
        cut: Line cut spanning the peak
        model: Gaussian or Lorentzian
        calib: Pixel scale; without it nm values equal pixel values
        origin_px: Pixel position that maps to 0 nm
        options: Fit options (Poisson weighting etc.)

    Returns:
        PeakLocation; sigma_nm^2 = (k sigma_px)^2 + ((c - origin) sigma_k)^2

    Raises:
        FitFailure: the fit did not converge
    """
    if cut.values.size == 0:
        raise ArgumentError("empty line cut")
    peak = int(np.argmax(cut.values))
    if peak == 0 or peak == cut.values.size - 1:
        raise ArgumentError(
            f"peak of {cut.axis.value}-cut at index {cut.fixed_index} lies on the window boundary"
        )

    result = fit(model.spec, cut.positions, cut.values, options=options)
    if not result.converged:
        raise FitFailure(
            f"{model.value} fit of {cut.axis.value}-cut at index {cut.fixed_index} "
            f"did not converge after {result.iterations} iterations",
            fit=result,
        )

    center_px = result.parameter("center")
    sigma_px = result.uncertainty("center")
    if calib is None:
        center_nm, sigma_nm = center_px - origin_px, sigma_px
    else:
        distance = center_px - origin_px
        center_nm = distance * calib.nm_per_px
        sigma_nm = quadrature(calib.nm_per_px * sigma_px, distance * calib.sigma_nm_per_px)
    return PeakLocation(center_px, sigma_px, center_nm, sigma_nm, model, result, cut.axis)


def calibrate(
    mark_a: PeakLocation,
    mark_b: PeakLocation,
    known_separation_nm: float,
    source_marks: Tuple[str, str] = ("A", "B"),
) -> Calibration:
    """
    nm_per_px = known / |b - a|; sigma by first-order propagation of both
    center uncertainties.

    Raises:
        DegenerateCalibrationError: marks closer than 1 px
    """
    if not known_separation_nm > 0:
        raise ArgumentError(f"known_separation_nm must be > 0, got {known_separation_nm}")
    delta = abs(mark_b.center_px - mark_a.center_px)
    if delta < 1.0:
        raise DegenerateCalibrationError(
            f"marks {source_marks[0]} and {source_marks[1]} are {delta:.3g} px apart"
        )
    nm_per_px = known_separation_nm / delta
    sigma = nm_per_px * quadrature(mark_a.sigma_center_px, mark_b.sigma_center_px) / delta
    return Calibration(nm_per_px, sigma, tuple(source_marks), known_separation_nm)


def detect_peak(pixels: np.ndarray, box_px: int = 3, window: Optional[Tuple[int, int, int, int]] = None) -> Tuple[int, int]:
    """
    Coarse (column, row) of the brightest box-blurred pixel; ties go to the
    lowest index. `window` is (col_lo, col_hi, row_lo, row_hi), inclusive.
    """
    blurred = ndimage.uniform_filter(np.asarray(pixels, dtype=float), size=box_px, mode="nearest")
    col_lo, row_lo = 0, 0
    if window is not None:
        col_lo, col_hi, row_lo, row_hi = window
        blurred = blurred[row_lo:row_hi + 1, col_lo:col_hi + 1]
    if blurred.size == 0:
        raise BoundsError("empty search window")
    row, col = np.unravel_index(int(np.argmax(blurred)), blurred.shape)
    return int(col) + col_lo, int(row) + row_lo


def _search_window(frame: Frame, mark: MarkWindow) -> Tuple[int, int, int, int]:
    pitch = frame.pixel_pitch_nm
    col = mark.center_x_nm / pitch - 0.5
    row = mark.center_y_nm / pitch - 0.5
    half = mark.search_halfwidth_nm / pitch
    window = (
        max(int(np.floor(col - half)), 0),
        min(int(np.ceil(col + half)), frame.width - 1),
        max(int(np.floor(row - half)), 0),
        min(int(np.ceil(row + half)), frame.height - 1),
    )
    if window[0] > window[1] or window[2] > window[3]:
        raise BoundsError(f"search window of mark {mark.name} lies outside the frame")
    return window


def _stage(name: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except DotFoundryError as e:
        logger.debug(f"Stage {name} failed: {e}")
        raise StageError(name, e) from e


def _fit_mark_axes(
    frame: Frame, coarse: Tuple[int, int], options: LocalizationOptions
) -> Tuple[PeakLocation, PeakLocation]:
    """
    Mark center per axis from cuts across the perpendicular arm, offset from
    the cross center so the cut does not run along the other arm.
    """
    pitch = frame.pixel_pitch_nm
    offset = int(round(options.mark_cut_offset_nm / pitch))
    half = options.mark_fit_halfwidth_nm / pitch
    col, row = coarse
    fit_options = options.peak_fit_options
    h = options.averaging_halfwidth_px

    x_cut = extract_line_cut(frame, Axis.X, (col, row + offset), h).window(col, half)
    x_loc = locate_peak(x_cut, options.mark_model, options=fit_options)
    y_cut = extract_line_cut(frame, Axis.Y, (col + offset, row), h).window(row, half)
    y_loc = locate_peak(y_cut, options.mark_model, options=fit_options)
    return x_loc, y_loc


def _to_nm(loc: PeakLocation, calib: Calibration, origin_px: float) -> PeakLocation:
    distance = loc.center_px - origin_px
    sigma = quadrature(calib.nm_per_px * loc.sigma_center_px, distance * calib.sigma_nm_per_px)
    return replace(loc, center_nm=distance * calib.nm_per_px, sigma_center_nm=sigma)


def localize(
    surface_frame: Frame,
    emitter_frame: Frame,
    mark_layout: MarkLayout,
    options: Optional[LocalizationOptions] = None,
) -> LocalizationReport:
    """
    End-to-end two-color localization.

    Args:
        surface_frame: Frame focused on the surface (marks sharp)
        emitter_frame: Frame focused on the emitter layer
        mark_layout: Nominal mark positions and the known separation
        options: Pipeline options

    Returns:
        LocalizationReport with emitter-minus-reference-mark separations

    Raises:
        StageError: naming the failed stage
    """
    options = options or LocalizationOptions()
    if surface_frame.pixels.shape != emitter_frame.pixels.shape or (
        surface_frame.pixel_pitch_nm != emitter_frame.pixel_pitch_nm
    ):
        raise StageError(
            "geometry",
            ArgumentError(
                f"frames differ: {surface_frame.width}x{surface_frame.height} @ {surface_frame.pixel_pitch_nm} nm "
                f"vs {emitter_frame.width}x{emitter_frame.height} @ {emitter_frame.pixel_pitch_nm} nm"
            ),
        )

    raw_marks: List[Tuple[str, PeakLocation, PeakLocation]] = []
    for mark in mark_layout.marks:
        window = _stage("detect_marks", _search_window, surface_frame, mark)
        coarse = _stage("detect_marks", detect_peak, surface_frame.pixels, options.box_blur_px, window)
        x_loc, y_loc = _stage("fit_marks", _fit_mark_axes, surface_frame, coarse, options)
        raw_marks.append((mark.name, x_loc, y_loc))
    logger.debug(f"Fitted {len(raw_marks)} marks")

    axis = mark_layout.calibration_axis
    pick = 1 if axis is Axis.X else 2
    a, b = raw_marks[0], raw_marks[1]
    calib = _stage(
        "calibrate", calibrate, a[pick], b[pick], mark_layout.known_separation_nm, (a[0], b[0])
    )
    conversion = calib if options.include_calibration_uncertainty else replace(calib, sigma_nm_per_px=0.0)

    coarse = _stage("detect_emitter", detect_peak, emitter_frame.pixels, options.box_blur_px)
    half = options.emitter_fit_halfwidth_nm / emitter_frame.pixel_pitch_nm
    h = options.averaging_halfwidth_px
    fit_options = options.peak_fit_options
    origin_x, origin_y = a[1].center_px, a[2].center_px

    def fit_emitter(axis: Axis, origin: float) -> PeakLocation:
        center = coarse[0] if axis is Axis.X else coarse[1]
        cut = extract_line_cut(emitter_frame, axis, coarse, h).window(center, half)
        return locate_peak(cut, options.emitter_model, conversion, origin, fit_options)

    emitter_x = _stage("fit_emitter", fit_emitter, Axis.X, origin_x)
    emitter_y = _stage("fit_emitter", fit_emitter, Axis.Y, origin_y)

    marks = tuple(
        MarkLocation(name, _to_nm(x, conversion, origin_x), _to_nm(y, conversion, origin_y))
        for name, x, y in raw_marks
    )
    reference = marks[0]
    separations = (
        Separation(
            Axis.X,
            emitter_x.center_nm - reference.x.center_nm,
            quadrature(emitter_x.sigma_center_nm, reference.x.sigma_center_nm),
        ),
        Separation(
            Axis.Y,
            emitter_y.center_nm - reference.y.center_nm,
            quadrature(emitter_y.sigma_center_nm, reference.y.sigma_center_nm),
        ),
    )
    logger.info(
        f"Localized emitter at ({separations[0].delta_nm:.1f} ± {separations[0].sigma_nm:.1f}, "
        f"{separations[1].delta_nm:.1f} ± {separations[1].sigma_nm:.1f}) nm from mark {reference.name}"
    )
    return LocalizationReport(emitter_x, emitter_y, marks, separations, calib)


@dataclass(frozen=True)
class UncertaintyHistogram:
    """Binned one-sigma uncertainties of one category."""
    category: str
    mean_nm: float
    values_nm: np.ndarray
    bin_left_nm: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "category": self.category,
            "mean_nm": self.mean_nm,
            "n": int(self.values_nm.size),
            "bin_left_nm": [float(v) for v in self.bin_left_nm],
            "counts": [int(c) for c in self.counts],
        }


UNCERTAINTY_CATEGORIES = ("emitter", "mark", "separation")


def uncertainty_histogram(
    reports: Sequence[LocalizationReport], bin_width_nm: float = 2.0
) -> Dict[str, UncertaintyHistogram]:
    """
    Means and histograms of per-axis uncertainties for the emitter, the
    reference mark and the emitter-mark separation.
    """
    if not reports:
        raise ArgumentError("uncertainty_histogram needs at least one report")
    if not bin_width_nm > 0:
        raise ArgumentError(f"bin_width_nm must be > 0, got {bin_width_nm}")

    samples = {
        "emitter": [s for r in reports for s in (r.emitter_x.sigma_center_nm, r.emitter_y.sigma_center_nm)],
        "mark": [
            s for r in reports for s in (r.reference_mark.x.sigma_center_nm, r.reference_mark.y.sigma_center_nm)
        ],
        "separation": [s.sigma_nm for r in reports for s in r.separations],
    }
    histograms = {}
    for category in UNCERTAINTY_CATEGORIES:
        values = np.asarray(samples[category], dtype=float)
        n_bins = max(int(np.ceil(np.max(values) / bin_width_nm)), 1)
        if n_bins * bin_width_nm <= np.max(values):
            n_bins += 1
        edges = np.arange(n_bins + 1) * bin_width_nm
        counts, _ = np.histogram(values, bins=edges)
        histograms[category] = UncertaintyHistogram(
            category, float(np.mean(values)), values, edges[:-1], counts
        )
    return histograms
