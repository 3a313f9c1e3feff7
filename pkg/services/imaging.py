"""
Imaging Service - Synthetic two-color EMCCD frames.

Renders the expected image of one emitter and a set of cross-shaped
alignment marks on a uniform background, then applies camera noise.
Frames are the ground truth that localization is validated against.

Coordinates: pixel (i, j) covers [i*p, (i+1)*p) x [j*p, (j+1)*p) nm on the
sample plane, so its center sits at ((i + 0.5) p, (j + 0.5) p). Pixel arrays
are indexed [row, column] = [j, i].
"""

import math
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage, special

from utils.errors import ArgumentError, BoundsError
from utils.rng import derive_seed, get_rng

logger = logging.getLogger(__name__)

GAUSSIAN_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
ADC_MAX = 65535


class EmitterProfile(Enum):
    """2D point-spread profile of the emitter."""
    GAUSSIAN = "Gaussian"
    LORENTZIAN = "Lorentzian"


class FocusPlane(Enum):
    """Which plane the camera is focused on."""
    SURFACE_PLANE = "SurfacePlane"
    EMITTER_PLANE = "EmitterPlane"


@dataclass(frozen=True)
class EmitterSpec:
    """A single point emitter; peak_counts is the in-focus value at the center."""
    x_nm: float
    y_nm: float
    peak_counts: float
    psf_fwhm_nm: float
    profile: EmitterProfile = EmitterProfile.LORENTZIAN

    def __post_init__(self):
        if not self.psf_fwhm_nm > 0:
            raise ArgumentError(f"psf_fwhm_nm must be > 0, got {self.psf_fwhm_nm}")
        if not self.peak_counts >= 0:
            raise ArgumentError(f"peak_counts must be >= 0, got {self.peak_counts}")


@dataclass(frozen=True)
class MarkSpec:
    """
    Cross-shaped alignment mark: two arms of arm_length_nm x arm_width_nm
    crossing at the center. edge_blur_nm is the Gaussian sigma of the edges.
    """
    center_x_nm: float
    center_y_nm: float
    arm_length_nm: float
    arm_width_nm: float
    reflectance_counts: float
    edge_blur_nm: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not self.arm_width_nm > 0:
            raise ArgumentError(f"arm_width_nm must be > 0, got {self.arm_width_nm}")
        if not self.arm_length_nm >= self.arm_width_nm:
            raise ArgumentError(
                f"arm_length_nm ({self.arm_length_nm}) must be >= arm_width_nm ({self.arm_width_nm})"
            )
        if self.edge_blur_nm < 0:
            raise ArgumentError(f"edge_blur_nm must be >= 0, got {self.edge_blur_nm}")

    @property
    def area_nm2(self) -> float:
        return 2.0 * self.arm_length_nm * self.arm_width_nm - self.arm_width_nm ** 2


@dataclass(frozen=True)
class SceneSpec:
    """
    What the camera sees: emitter, marks, background and focus.

    surface_defocus_nm blurs the marks when the camera is focused on the
    emitter plane; emitter_defocus_nm blurs the emitter when focused on the
    surface.
    """
    emitter: Optional[EmitterSpec] = None
    marks: Tuple[MarkSpec, ...] = ()
    background_counts: float = 0.0
    focus: FocusPlane = FocusPlane.SURFACE_PLANE
    surface_defocus_nm: float = 0.0
    emitter_defocus_nm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "marks", tuple(self.marks))
        if self.background_counts < 0:
            raise ArgumentError(f"background_counts must be >= 0, got {self.background_counts}")
        if self.surface_defocus_nm < 0 or self.emitter_defocus_nm < 0:
            raise ArgumentError("defocus blur must be >= 0")

    def with_focus(self, focus: FocusPlane) -> "SceneSpec":
        return replace(self, focus=focus)

    def shifted(self, dx_nm: float, dy_nm: float) -> "SceneSpec":
        """The same scene translated by (dx_nm, dy_nm)."""
        emitter = None
        if self.emitter is not None:
            emitter = replace(self.emitter, x_nm=self.emitter.x_nm + dx_nm, y_nm=self.emitter.y_nm + dy_nm)
        marks = tuple(
            replace(m, center_x_nm=m.center_x_nm + dx_nm, center_y_nm=m.center_y_nm + dy_nm)
            for m in self.marks
        )
        return replace(self, emitter=emitter, marks=marks)


@dataclass(frozen=True)
class NoiseSpec:
    """
    Camera noise. Photon shot noise is Poisson; EMCCD gain > 1 adds the
    gain-register excess noise as a gamma draw per photoelectron count
    (variance 2 gain^2 expected); read noise is Gaussian.
    """
    photon_shot: bool = False
    emccd_gain: float = 1.0
    read_noise_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.emccd_gain >= 1.0:
            raise ArgumentError(f"emccd_gain must be >= 1, got {self.emccd_gain}")
        if not self.read_noise_rms >= 0.0:
            raise ArgumentError(f"read_noise_rms must be >= 0, got {self.read_noise_rms}")

    @property
    def enabled(self) -> bool:
        return self.photon_shot or self.emccd_gain > 1.0 or self.read_noise_rms > 0.0


@dataclass(frozen=True)
class FrameGeometry:
    """Detector size and sampling."""
    width: int
    height: int
    pixel_pitch_nm: float
    exposure_s: float = 0.1

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ArgumentError(f"frame size must be positive, got {self.width}x{self.height}")
        if not self.pixel_pitch_nm > 0:
            raise ArgumentError(f"pixel_pitch_nm must be > 0, got {self.pixel_pitch_nm}")
        if not self.exposure_s > 0:
            raise ArgumentError(f"exposure_s must be > 0, got {self.exposure_s}")

    @property
    def width_nm(self) -> float:
        return self.width * self.pixel_pitch_nm

    @property
    def height_nm(self) -> float:
        return self.height * self.pixel_pitch_nm


@dataclass(frozen=True)
class Frame:
    """A 2D intensity image [counts] with its sampling metadata."""
    pixels: np.ndarray
    pixel_pitch_nm: float
    exposure_s: float = 0.1
    focus: Optional[FocusPlane] = field(default=None, compare=False)

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ArgumentError(f"pixels must be a non-empty 2D array, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or np.any(pixels < 0):
            raise ArgumentError("pixel values must be finite and >= 0")
        if not self.pixel_pitch_nm > 0:
            raise ArgumentError(f"pixel_pitch_nm must be > 0, got {self.pixel_pitch_nm}")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def geometry(self) -> FrameGeometry:
        return FrameGeometry(self.width, self.height, self.pixel_pitch_nm, self.exposure_s)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.pixel_pitch_nm == other.pixel_pitch_nm
            and self.exposure_s == other.exposure_s
            and np.array_equal(self.pixels, other.pixels)
        )


def check_scene_bounds(scene: SceneSpec, geometry: FrameGeometry) -> None:
    """Raise BoundsError unless every feature lies inside the frame."""
    w_nm, h_nm = geometry.width_nm, geometry.height_nm
    if scene.emitter is not None:
        e = scene.emitter
        if not (0.0 <= e.x_nm <= w_nm and 0.0 <= e.y_nm <= h_nm):
            raise BoundsError(
                f"emitter at ({e.x_nm}, {e.y_nm}) nm is outside the {w_nm} x {h_nm} nm frame"
            )
    for k, mark in enumerate(scene.marks):
        half = 0.5 * mark.arm_length_nm
        if not (
            half <= mark.center_x_nm <= w_nm - half and half <= mark.center_y_nm <= h_nm - half
        ):
            label = mark.name or f"#{k}"
            raise BoundsError(
                f"mark {label} at ({mark.center_x_nm}, {mark.center_y_nm}) nm "
                f"does not fit inside the {w_nm} x {h_nm} nm frame"
            )


def _sample_axis(n_pixels: int, pitch: float, supersample: int) -> np.ndarray:
    """Sub-pixel midpoints along one axis [nm]."""
    return (np.arange(n_pixels * supersample) + 0.5) * (pitch / supersample)


def _bin(fine: np.ndarray, supersample: int) -> np.ndarray:
    """Average supersample x supersample blocks back to pixels."""
    h, w = fine.shape[0] // supersample, fine.shape[1] // supersample
    return fine.reshape(h, supersample, w, supersample).mean(axis=(1, 3))


def _box_profile(x: np.ndarray, low: float, high: float, sigma: float) -> np.ndarray:
    """Indicator of [low, high] convolved with a unit Gaussian of width sigma."""
    if sigma == 0:
        return ((x >= low) & (x < high)).astype(float)
    scale = math.sqrt(2.0) * sigma
    return 0.5 * (special.erf((high - x) / scale) - special.erf((low - x) / scale))


def render_emitter(emitter: EmitterSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Emitter intensity sampled on the grid ys x xs [counts per pixel]."""
    dx2 = (xs - emitter.x_nm) ** 2
    dy2 = (ys - emitter.y_nm) ** 2
    if emitter.profile is EmitterProfile.GAUSSIAN:
        sigma = emitter.psf_fwhm_nm / GAUSSIAN_FWHM_PER_SIGMA
        # separable
        gx = np.exp(-dx2 / (2.0 * sigma * sigma))
        gy = np.exp(-dy2 / (2.0 * sigma * sigma))
        return emitter.peak_counts * np.outer(gy, gx)
    hwhm2 = (0.5 * emitter.psf_fwhm_nm) ** 2
    return emitter.peak_counts * hwhm2 / (dy2[:, None] + dx2[None, :] + hwhm2)


def render_mark(mark: MarkSpec, xs: np.ndarray, ys: np.ndarray, extra_blur_nm: float = 0.0) -> np.ndarray:
    """Cross = horizontal arm + vertical arm - their overlap, each edge-blurred."""
    sigma = math.hypot(mark.edge_blur_nm, extra_blur_nm)
    half_l = 0.5 * mark.arm_length_nm
    half_w = 0.5 * mark.arm_width_nm
    cx, cy = mark.center_x_nm, mark.center_y_nm

    long_x = _box_profile(xs, cx - half_l, cx + half_l, sigma)
    narrow_x = _box_profile(xs, cx - half_w, cx + half_w, sigma)
    long_y = _box_profile(ys, cy - half_l, cy + half_l, sigma)
    narrow_y = _box_profile(ys, cy - half_w, cy + half_w, sigma)

    cross = np.outer(narrow_y, long_x) + np.outer(long_y, narrow_x) - np.outer(narrow_y, narrow_x)
    return mark.reflectance_counts * cross


def expected_image(scene: SceneSpec, geometry: FrameGeometry, supersample: int = 3) -> np.ndarray:
    """
    Noise-free image: background + emitter + marks, each pixel the midpoint-rule
    average over supersample x supersample sub-pixels.
    """
    if supersample < 1:
        raise ArgumentError(f"supersample must be >= 1, got {supersample}")
    check_scene_bounds(scene, geometry)
    pitch = geometry.pixel_pitch_nm
    xs = _sample_axis(geometry.width, pitch, supersample)
    ys = _sample_axis(geometry.height, pitch, supersample)

    image = np.full((geometry.height, geometry.width), float(scene.background_counts))

    if scene.emitter is not None:
        emitter = _bin(render_emitter(scene.emitter, xs, ys), supersample)
        if scene.focus is FocusPlane.SURFACE_PLANE and scene.emitter_defocus_nm > 0:
            emitter = ndimage.gaussian_filter(
                emitter, sigma=scene.emitter_defocus_nm / pitch, mode="constant"
            )
        image += emitter

    mark_blur = scene.surface_defocus_nm if scene.focus is FocusPlane.EMITTER_PLANE else 0.0
    for mark in scene.marks:
        image += _bin(render_mark(mark, xs, ys, mark_blur), supersample)

    return image


def apply_noise(image: np.ndarray, noise: NoiseSpec, adc_max: int = ADC_MAX) -> np.ndarray:
    """
    Shot, EMCCD excess and read noise, then digitization.

    The draw order is fixed (Poisson, gamma, normal) so a seed always
    reproduces the same frame.
    """
    if not noise.enabled:
        return image.copy()
    rng = get_rng(noise.seed)
    counts = image.copy()
    if noise.photon_shot:
        counts = rng.poisson(counts).astype(np.float64)
    if noise.emccd_gain > 1.0:
        lit = counts > 0
        amplified = np.zeros_like(counts)
        amplified[lit] = rng.gamma(shape=counts[lit], scale=noise.emccd_gain)
        counts = amplified
    if noise.read_noise_rms > 0.0:
        counts = counts + rng.normal(0.0, noise.read_noise_rms, size=counts.shape)
    counts = np.clip(np.rint(counts), 0.0, adc_max)
    saturated = int(np.count_nonzero(counts >= adc_max))
    if saturated:
        logger.warning(f"{saturated} pixels saturated at {adc_max} counts")
    return counts


def render_frame(
    scene: SceneSpec,
    noise: NoiseSpec,
    geometry: FrameGeometry,
    supersample: int = 3,
    adc_max: int = ADC_MAX,
) -> Frame:
    """
    Render one frame of a scene.

    Args:
        scene: Emitter, marks, background and focus plane
        noise: Camera noise and seed
        geometry: Frame size and pixel pitch
        supersample: Sub-pixels per pixel edge for the midpoint rule
        adc_max: Saturation level after digitization

    Returns:
        Frame; deterministic for a fixed seed

    Raises:
        BoundsError: a feature lies outside the frame
    """
    image = expected_image(scene, geometry, supersample)
    pixels = apply_noise(image, noise, adc_max)
    logger.debug(
        f"Rendered {geometry.width}x{geometry.height} frame at {geometry.pixel_pitch_nm} nm/px, "
        f"focus={scene.focus.value}, seed={noise.seed}"
    )
    return Frame(pixels, geometry.pixel_pitch_nm, geometry.exposure_s, focus=scene.focus)


def render_pair(
    scene: SceneSpec,
    noise: NoiseSpec,
    geometry: FrameGeometry,
    supersample: int = 3,
) -> Tuple[Frame, Frame]:
    """
    The two-color pair: a surface-focus frame (marks sharp) and an
    emitter-focus frame (emitter sharp, marks fading). Each frame gets its
    own noise stream derived from the seed.
    """
    surface = render_frame(
        scene.with_focus(FocusPlane.SURFACE_PLANE),
        replace(noise, seed=derive_seed(noise.seed, 0)),
        geometry,
        supersample,
    )
    emitter = render_frame(
        scene.with_focus(FocusPlane.EMITTER_PLANE),
        replace(noise, seed=derive_seed(noise.seed, 1)),
        geometry,
        supersample,
    )
    return surface, emitter
