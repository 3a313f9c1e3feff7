"""
DotFoundry Services
===================

Quantum-dot device pipeline: fitting, synthetic imaging, two-color
localization, micropillar design and photon statistics.
"""

# Fitting
from .fit_engine import (
    FitOptions,
    FitResult,
    evaluate_model,
    fit,
    initial_guess,
)

# Imaging & Frame I/O
from .imaging import (
    EmitterProfile,
    EmitterSpec,
    FocusPlane,
    Frame,
    FrameGeometry,
    MarkSpec,
    NoiseSpec,
    SceneSpec,
    render_frame,
    render_pair,
)

from .frame_io import (
    read_frame,
    write_frame,
)

# Localization
from .localization import (
    Axis,
    Calibration,
    LineCut,
    LocalizationOptions,
    LocalizationReport,
    MarkLayout,
    MarkWindow,
    PeakLocation,
    PeakModel,
    calibrate,
    extract_line_cut,
    locate_peak,
    localize,
    uncertainty_histogram,
)

from .batch_localization import (
    BatchLocalizationService,
    BatchLocalizationResult,
    SceneStatus,
    jitter_scenes,
)

# Cavity Design
from .bessel import (
    bessel_j,
    bessel_zero,
)

from .cavity_design import (
    EmitterDistribution,
    ModeIndex,
    PillarDesign,
    PlanarCavity,
    TuningRange,
    YieldEstimate,
    estimate_yield,
    exact_radius,
    mode_curve,
    mode_energy,
    select_radius,
)

# Photon Statistics
from .photon_stats import (
    CoincidenceHistogram,
    DecayTrace,
    EfficiencyBudget,
    SourceReport,
    Spectrum,
    efficiency_budget,
    extraction_efficiency,
    fit_lifetime,
    fit_saturation,
    g2_zero,
    purcell_factor,
    q_factor,
)

from .histogram_simulator import (
    RecaptureSpec,
    SourceSpec,
    simulate_histogram,
)

__all__ = [
    # Fitting
    'FitOptions',
    'FitResult',
    'evaluate_model',
    'fit',
    'initial_guess',

    # Imaging
    'EmitterProfile',
    'EmitterSpec',
    'FocusPlane',
    'Frame',
    'FrameGeometry',
    'MarkSpec',
    'NoiseSpec',
    'SceneSpec',
    'render_frame',
    'render_pair',
    'read_frame',
    'write_frame',

    # Localization
    'Axis',
    'Calibration',
    'LineCut',
    'LocalizationOptions',
    'LocalizationReport',
    'MarkLayout',
    'MarkWindow',
    'PeakLocation',
    'PeakModel',
    'calibrate',
    'extract_line_cut',
    'locate_peak',
    'localize',
    'uncertainty_histogram',
    'BatchLocalizationService',
    'BatchLocalizationResult',
    'SceneStatus',
    'jitter_scenes',

    # Cavity Design
    'bessel_j',
    'bessel_zero',
    'EmitterDistribution',
    'ModeIndex',
    'PillarDesign',
    'PlanarCavity',
    'TuningRange',
    'YieldEstimate',
    'estimate_yield',
    'exact_radius',
    'mode_curve',
    'mode_energy',
    'select_radius',

    # Photon Statistics
    'CoincidenceHistogram',
    'DecayTrace',
    'EfficiencyBudget',
    'SourceReport',
    'Spectrum',
    'efficiency_budget',
    'extraction_efficiency',
    'fit_lifetime',
    'fit_saturation',
    'g2_zero',
    'purcell_factor',
    'q_factor',
    'RecaptureSpec',
    'SourceSpec',
    'simulate_histogram',
]

__version__ = "1.0.0"
