"""
Batch Localization Service - Localize many simulated scenes.
Supports parallel processing, progress tracking, cancellation and the
uncertainty summary over the batch.
"""

import logging
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from services.imaging import FrameGeometry, NoiseSpec, SceneSpec, render_pair
from services.localization import (
    LocalizationOptions,
    LocalizationReport,
    MarkLayout,
    UncertaintyHistogram,
    localize,
    uncertainty_histogram,
)
from utils.errors import ArgumentError, DotFoundryError, StageError
from utils.rng import derive_seed, trial_rng

logger = logging.getLogger(__name__)


class SceneStatus(Enum):
    """Status of one scene in a batch."""
    PENDING = "pending"
    COMPLETED = "completed"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass
class SceneResult:
    """Result of localizing a single scene."""
    index: int
    seed: int
    status: SceneStatus
    report: Optional[LocalizationReport] = None
    true_separation_nm: Optional[Tuple[float, float]] = None
    failed_stage: Optional[str] = None
    error_message: Optional[str] = None


@dataclass
class BatchLocalizationResult:
    """Result of a full batch."""
    total_scenes: int
    completed: int
    failed: int
    skipped: int
    timestamp: str
    scene_results: List[SceneResult] = field(default_factory=list)
    summary: Dict[str, UncertaintyHistogram] = field(default_factory=dict)

    @property
    def reports(self) -> List[LocalizationReport]:
        return [r.report for r in self.scene_results if r.status == SceneStatus.COMPLETED]


def true_separation(scene: SceneSpec) -> Tuple[float, float]:
    """Emitter minus first mark, per axis [nm]."""
    if scene.emitter is None or not scene.marks:
        raise ArgumentError("scene needs an emitter and at least one mark")
    mark = scene.marks[0]
    return scene.emitter.x_nm - mark.center_x_nm, scene.emitter.y_nm - mark.center_y_nm


def jitter_scenes(base: SceneSpec, n_scenes: int, jitter_nm: float, seed: int) -> List[SceneSpec]:
    """
    n_scenes copies of `base` with the emitter moved uniformly within
    +-jitter_nm per axis; marks stay put.
    """
    if base.emitter is None:
        raise ArgumentError("base scene has no emitter to jitter")
    if n_scenes < 1:
        raise ArgumentError(f"n_scenes must be >= 1, got {n_scenes}")
    scenes = []
    for k in range(n_scenes):
        dx, dy = trial_rng(seed, k).uniform(-jitter_nm, jitter_nm, size=2)
        emitter = replace(base.emitter, x_nm=base.emitter.x_nm + dx, y_nm=base.emitter.y_nm + dy)
        scenes.append(replace(base, emitter=emitter))
    return scenes


class BatchLocalizationService:
    """
    Service for localizing a batch of scenes.
    Renders each scene's two-color frame pair, localizes it and aggregates
    the uncertainty histograms.
    """

    def __init__(
        self,
        layout: MarkLayout,
        geometry: FrameGeometry,
        noise: NoiseSpec,
        options: Optional[LocalizationOptions] = None,
        supersample: int = 3,
        threads: int = 1,
        bin_width_nm: float = 2.0,
    ):
        """
        Initialize the batch service.

        Args:
            layout: Mark layout shared by every scene
            geometry: Frame geometry
            noise: Noise template; each scene gets its own derived seed
            options: Localization options
            supersample: Midpoint-rule subsampling for rendering
            threads: Worker threads (1 = sequential); results do not depend on it
            bin_width_nm: Histogram bin width of the summary
        """
        self.layout = layout
        self.geometry = geometry
        self.noise = noise
        self.options = options or LocalizationOptions()
        self.supersample = supersample
        self.threads = max(int(threads), 1)
        self.bin_width_nm = bin_width_nm

        self._progress_callback: Optional[Callable[[int, int, str], None]] = None
        self._cancel_flag = threading.Event()
        self._lock = threading.Lock()
        self._done = 0

    def set_progress_callback(self, callback: Callable[[int, int, str], None]):
        """
        Set a callback for progress updates.

        Args:
            callback: Function taking (current, total, message)
        """
        self._progress_callback = callback

    def _report_progress(self, current: int, total: int, message: str):
        if self._progress_callback:
            self._progress_callback(current, total, message)

    def cancel(self):
        """Cancel an ongoing batch; scenes not yet started are skipped."""
        self._cancel_flag.set()

    def localize_scene(self, index: int, scene: SceneSpec, seed: int) -> SceneResult:
        """Render and localize one scene; failures are recorded, not raised."""
        scene_seed = derive_seed(seed, index)
        result = SceneResult(index=index, seed=scene_seed, status=SceneStatus.PENDING)
        if self._cancel_flag.is_set():
            result.status = SceneStatus.SKIPPED
            return result
        try:
            result.true_separation_nm = true_separation(scene)
            surface, emitter = render_pair(
                scene, replace(self.noise, seed=scene_seed), self.geometry, self.supersample
            )
            result.report = localize(surface, emitter, self.layout, self.options)
            result.status = SceneStatus.COMPLETED
        except StageError as e:
            result.status = SceneStatus.FAILED
            result.failed_stage = e.stage
            result.error_message = str(e)
            logger.warning(f"Scene {index} failed: {e}")
        except DotFoundryError as e:
            result.status = SceneStatus.FAILED
            result.error_message = str(e)
            logger.warning(f"Scene {index} failed: {e}")
        return result

    def _run_one(self, index: int, scene: SceneSpec, seed: int, total: int) -> SceneResult:
        result = self.localize_scene(index, scene, seed)
        with self._lock:
            self._done += 1
            done = self._done
        self._report_progress(done, total, f"Scene {index} {result.status.value}")
        return result

    def run_batch(self, scenes: Sequence[SceneSpec], seed: int) -> BatchLocalizationResult:
        """
        Localize every scene.

        Args:
            scenes: Scenes to render and localize
            seed: Batch seed; scene k uses a seed derived from (seed, k)

        Returns:
            BatchLocalizationResult in scene order
        """
        self._cancel_flag.clear()
        self._done = 0
        total = len(scenes)
        result = BatchLocalizationResult(
            total_scenes=total,
            completed=0,
            failed=0,
            skipped=0,
            timestamp=datetime.now().isoformat(),
        )
        if not scenes:
            return result

        self._report_progress(0, total, "Starting batch localization...")
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = [pool.submit(self._run_one, k, s, seed, total) for k, s in enumerate(scenes)]
                scene_results = [f.result() for f in futures]
        else:
            scene_results = [self._run_one(k, s, seed, total) for k, s in enumerate(scenes)]

        result.scene_results = scene_results
        for r in scene_results:
            if r.status == SceneStatus.COMPLETED:
                result.completed += 1
            elif r.status == SceneStatus.FAILED:
                result.failed += 1
            elif r.status == SceneStatus.SKIPPED:
                result.skipped += 1

        if result.reports:
            result.summary = uncertainty_histogram(result.reports, self.bin_width_nm)
        self._report_progress(total, total, "Batch localization complete")
        logger.info(
            f"Batch of {total} scenes: {result.completed} completed, "
            f"{result.failed} failed, {result.skipped} skipped"
        )
        return result
