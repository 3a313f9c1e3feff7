"""
DotFoundry command line.

Subcommands:
    simulate-frame      render a surface/emitter frame pair from a scene config
    simulate-histogram  sample a pulsed coincidence histogram
    localize            two-color localization of a frame pair, or --scenes N batch
    design              pick a pillar diameter for a target line and write its mode curve
    characterize        lifetime, Q, saturation, g2 and efficiency report
    yield               Monte-Carlo device yield

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
"""

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv

from cli.run_config import (
    BudgetConfig,
    CharacterizeConfig,
    DesignConfig,
    HistogramConfig,
    LayoutConfig,
    SceneConfig,
    YieldConfig,
    from_dict,
    load_run_config,
    resolve_path,
)
from export.data_io import (
    read_decay_trace,
    read_histogram,
    read_saturation,
    read_spectrum,
    write_histogram,
    write_mode_curve,
    write_spectrum,
    write_uncertainty_histograms,
)
from export.report_writer import ReportWriter, format_table
from services.batch_localization import BatchLocalizationService, jitter_scenes, true_separation
from services.cavity_design import (
    DistributionKind,
    EmitterDistribution,
    ModeIndex,
    PlanarCavity,
    TuningRange,
    diameter_grid,
    estimate_yield,
    mode_curve,
    select_radius,
    wavelength_to_energy,
)
from services.fit_engine import evaluate_model
from services.frame_io import read_frame, write_frame
from services.histogram_simulator import RecaptureSpec, SourceSpec, simulate_histogram
from services.imaging import (
    EmitterProfile,
    EmitterSpec,
    FrameGeometry,
    MarkSpec,
    NoiseSpec,
    SceneSpec,
    render_pair,
)
from services.localization import LocalizationOptions, MarkLayout, MarkWindow, localize
from services.photon_stats import (
    G2Result,
    build_source_report,
    efficiency_budget,
    fit_lifetime,
    fit_saturation,
    g2_zero,
    q_factor,
)
from utils.errors import ArgumentError, ConfigError, DegenerateDataError, DotFoundryError
from utils.measurements import Measurement
from utils.rng import resolve_seed
from utils.settings import Settings

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(settings: Settings, verbose: bool = False, quiet: bool = False) -> None:
    """Configure the root logger once per invocation; stdout stays clean."""
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = getattr(logging, settings.get_log_level(), logging.INFO)

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    log_file = settings.get("logging.file")
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _writer(settings: Settings) -> ReportWriter:
    return ReportWriter(settings.get_significant_digits())


def _output_dir(args: argparse.Namespace, configured: str) -> Path:
    return Path(args.output_dir or configured)


def _scene_from_config(config: SceneConfig) -> SceneSpec:
    emitter = EmitterSpec(
        x_nm=config.emitter.x_nm,
        y_nm=config.emitter.y_nm,
        peak_counts=config.emitter.peak_counts,
        psf_fwhm_nm=config.emitter.psf_fwhm_nm,
        profile=EmitterProfile(config.emitter.profile),
    )
    marks = tuple(
        MarkSpec(
            center_x_nm=m.center_x_nm,
            center_y_nm=m.center_y_nm,
            arm_length_nm=m.arm_length_nm,
            arm_width_nm=m.arm_width_nm,
            reflectance_counts=m.reflectance_counts,
            edge_blur_nm=m.edge_blur_nm,
            name=m.name,
        )
        for m in config.marks
    )
    return SceneSpec(
        emitter=emitter,
        marks=marks,
        background_counts=config.background_counts,
        surface_defocus_nm=config.surface_defocus_nm,
        emitter_defocus_nm=config.emitter_defocus_nm,
    )


def _geometry_from_config(config: SceneConfig) -> FrameGeometry:
    frame = config.frame
    return FrameGeometry(frame.width_px, frame.height_px, frame.pixel_pitch_nm, frame.exposure_s)


def _noise_from_config(config: SceneConfig, seed: int) -> NoiseSpec:
    noise = config.noise
    return NoiseSpec(noise.photon_shot, noise.emccd_gain, noise.read_noise_rms, seed)


def _layout_from_scene(config: SceneConfig) -> Dict[str, Any]:
    return {
        "marks": [
            {
                "name": m.name,
                "center_x_nm": m.center_x_nm,
                "center_y_nm": m.center_y_nm,
                "search_halfwidth_nm": m.search_halfwidth_nm,
            }
            for m in config.marks
        ],
        "known_separation_nm": config.known_separation_nm,
    }


def _layout(config: LayoutConfig) -> MarkLayout:
    return MarkLayout(
        tuple(MarkWindow(m.name, m.center_x_nm, m.center_y_nm, m.search_halfwidth_nm) for m in config.marks),
        config.known_separation_nm,
    )


def _scene_truth(scene: SceneSpec, seed: int) -> Dict[str, Any]:
    dx, dy = true_separation(scene)
    return {
        "seed": seed,
        "emitter": {"x_nm": scene.emitter.x_nm, "y_nm": scene.emitter.y_nm},
        "marks": [{"name": m.name, "x_nm": m.center_x_nm, "y_nm": m.center_y_nm} for m in scene.marks],
        "true_separation_nm": {"x": dx, "y": dy},
    }


def cmd_simulate_frame(args: argparse.Namespace, settings: Settings) -> int:
    """Render the two-color frame pair and print the ground truth as JSON."""
    config: SceneConfig = load_run_config(args.config, SceneConfig)
    seed = resolve_seed(args.seed, config.seed)
    out = _output_dir(args, config.output_dir)
    writer = _writer(settings)

    scene = _scene_from_config(config)
    geometry = _geometry_from_config(config)
    surface, emitter = render_pair(scene, _noise_from_config(config, seed), geometry, config.frame.supersample)

    write_frame(surface, out / "surface.pgm", quantize=True)
    write_frame(emitter, out / "emitter.pgm", quantize=True)
    writer.write_json(_layout_from_scene(config), out / "layout.json")
    truth = _scene_truth(scene, seed)
    writer.write_json(truth, out / "scene.json")
    sys.stdout.write(writer.to_json_text(truth))
    return 0


def _print_report_table(report) -> None:
    rows = [
        ("emitter x [nm]", report.emitter_x.center_nm, report.emitter_x.sigma_center_nm),
        ("emitter y [nm]", report.emitter_y.center_nm, report.emitter_y.sigma_center_nm),
    ]
    for sep in report.separations:
        rows.append((f"separation {sep.axis.value} [nm]", sep.delta_nm, sep.sigma_nm))
    rows.append(("nm per px", report.calibration.nm_per_px, report.calibration.sigma_nm_per_px))
    print(format_table(rows, ["quantity", "value", "sigma"]))


def _localize_batch(args: argparse.Namespace, settings: Settings) -> int:
    if not args.config:
        raise ConfigError("--scenes needs --config with a scene config", field="config")
    config: SceneConfig = load_run_config(args.config, SceneConfig)
    seed = resolve_seed(args.seed, config.seed)
    out = _output_dir(args, config.output_dir)
    writer = _writer(settings)
    n_scenes = args.scenes or config.scenes

    layout = _layout(from_dict(LayoutConfig, _layout_from_scene(config)))
    service = BatchLocalizationService(
        layout,
        _geometry_from_config(config),
        _noise_from_config(config, seed),
        LocalizationOptions.from_settings(settings),
        supersample=config.frame.supersample,
        threads=args.threads,
        bin_width_nm=float(settings.get("localization.histogram_bin_width_nm", 2.0)),
    )
    service.set_progress_callback(
        lambda current, total, message: logger.debug(f"[{current}/{total}] {message}")
    )
    scenes = jitter_scenes(_scene_from_config(config), n_scenes, config.jitter_nm, seed)
    result = service.run_batch(scenes, seed)

    for scene_result in result.scene_results:
        document = {
            "index": scene_result.index,
            "seed": scene_result.seed,
            "status": scene_result.status,
            "true_separation_nm": scene_result.true_separation_nm,
            "failed_stage": scene_result.failed_stage,
            "error": scene_result.error_message,
            "report": scene_result.report,
        }
        writer.write_json(document, out / "scenes" / f"scene_{scene_result.index:03d}.json")

    if not result.summary:
        logger.error(f"No scene of {result.total_scenes} localized successfully")
        return 1
    summary = {
        "total_scenes": result.total_scenes,
        "completed": result.completed,
        "failed": result.failed,
        "categories": result.summary,
    }
    writer.write_json(summary, out / "uncertainty_summary.json")
    write_uncertainty_histograms(result.summary, out / "uncertainty_histogram.csv", writer)
    rows = [(name, hist.mean_nm, int(hist.values_nm.size)) for name, hist in result.summary.items()]
    print(format_table(rows, ["category", "mean sigma [nm]", "n"]))
    print(f"{result.completed}/{result.total_scenes} scenes localized")
    return 0


def cmd_localize(args: argparse.Namespace, settings: Settings) -> int:
    """Localize one frame pair against a mark layout, or run a simulated batch."""
    if args.scenes is not None:
        return _localize_batch(args, settings)
    flags = (("--surface", args.surface), ("--emitter", args.emitter), ("--layout", args.layout))
    missing = [flag for flag, value in flags if not value]
    if missing:
        raise ConfigError(f"missing {', '.join(missing)}", field="localize")

    surface = read_frame(args.surface)
    emitter = read_frame(args.emitter)
    layout = _layout(load_run_config(args.layout, LayoutConfig))
    report = localize(surface, emitter, layout, LocalizationOptions.from_settings(settings))

    output = Path(args.output) if args.output else Path(args.output_dir or "out") / "report.json"
    _writer(settings).write_json(report, output)
    _print_report_table(report)
    return 0


def _cavity(settings: Settings, config) -> PlanarCavity:
    cavity = PlanarCavity.from_settings(settings)
    overrides = {k: v for k, v in asdict(config.cavity).items() if v is not None}
    return replace(cavity, **overrides) if overrides else cavity


def _grid(settings: Settings, config) -> Sequence[float]:
    if getattr(config, "diameters_um", None):
        return config.diameters_um
    if config.grid is not None:
        return diameter_grid(config.grid.min_um, config.grid.max_um, config.grid.step_um)
    return diameter_grid(
        float(settings.get("cavity.grid_min_um", 1.0)),
        float(settings.get("cavity.grid_max_um", 6.0)),
        float(settings.get("cavity.grid_step_um", 0.5)),
    )


def cmd_design(args: argparse.Namespace, settings: Settings) -> int:
    """Select a pillar diameter for the target and write the mode curve."""
    config: DesignConfig = load_run_config(args.config, DesignConfig) if args.config else DesignConfig()
    if args.target_nm is not None:
        config = replace(config, target_wavelength_nm=args.target_nm, target_ev=None)
    if args.target_ev is not None:
        config = replace(config, target_ev=args.target_ev, target_wavelength_nm=None)
    if config.target_ev is None and config.target_wavelength_nm is None:
        raise ConfigError("give target_wavelength_nm or target_ev", field="target_wavelength_nm")
    target_ev = config.target_ev or wavelength_to_energy(config.target_wavelength_nm)

    out = _output_dir(args, config.output_dir)
    writer = _writer(settings)
    cavity = _cavity(settings, config)
    mode = ModeIndex(config.mode.n_phi, config.mode.n_r)
    design = select_radius(cavity, target_ev, mode, _grid(settings, config))

    if config.curve is not None:
        curve_grid = diameter_grid(config.curve.min_um, config.curve.max_um, config.curve.step_um)
    else:
        curve_grid = diameter_grid(1.0, 6.0, 0.05)
    writer.write_json({"cavity": asdict(cavity), "design": design}, out / "design.json")
    write_mode_curve(mode_curve(cavity, mode, curve_grid), out / "mode_curve.csv", writer)

    print(
        format_table(
            [
                ("target [eV]", design.target_ev),
                ("diameter [um]", design.diameter_um),
                ("mode energy [eV]", design.energy_ev),
                ("wavelength [nm]", design.wavelength_nm),
                ("detuning [meV]", design.detuning_meV),
                ("exact radius [nm]", design.exact_radius_nm),
            ],
            ["quantity", "value"],
        )
    )
    return 0


def cmd_characterize(args: argparse.Namespace, settings: Settings) -> int:
    """Run every analysis the config has inputs for and write the source report."""
    config: CharacterizeConfig = load_run_config(args.config, CharacterizeConfig)
    out = _output_dir(args, config.output_dir)
    writer = _writer(settings)

    def path(value: Optional[str]) -> Optional[Path]:
        return resolve_path(args.config, value)

    window = tuple(config.lifetime_window_ps) if config.lifetime_window_ps else None
    cavity_lifetime = fit_lifetime(read_decay_trace(path(config.cavity_trace)), window) if config.cavity_trace else None
    reference_lifetime = (
        fit_lifetime(read_decay_trace(path(config.reference_trace)), window) if config.reference_trace else None
    )
    q = None
    if config.spectrum:
        spectrum_window = tuple(config.spectrum_window) if config.spectrum_window else None
        spectrum = read_spectrum(path(config.spectrum))
        q = q_factor(spectrum, spectrum_window)
        fitted = evaluate_model(q.fit.spec, q.fit.parameters, spectrum.axis)
        write_spectrum(spectrum, out / "spectrum_fit.csv", writer, fitted=fitted)
    saturation = fit_saturation(*read_saturation(path(config.saturation))) if config.saturation else None

    g2: Optional[G2Result] = None
    if config.histogram:
        g2 = g2_zero(
            read_histogram(path(config.histogram)),
            config.integration_halfwidth_ns,
            int(settings.get("photon_stats.side_peaks_per_side", 2)),
            config.dip_halfwidth_ns,
        )
    elif config.g2_zero is not None:
        measured = Measurement(config.g2_zero.value, config.g2_zero.sigma)
        g2 = G2Result(measured.value, measured.sigma, 0.0, (), 0.0)

    budget = None
    if config.budget is not None:
        budget = efficiency_budget([asdict(e) for e in config.budget])
    elif config.budget_path is not None:
        budget_config: BudgetConfig = load_run_config(path(config.budget_path), BudgetConfig)
        budget = efficiency_budget([asdict(e) for e in budget_config.elements])

    report = build_source_report(
        lifetime_cavity=cavity_lifetime,
        lifetime_reference=reference_lifetime,
        q=q,
        g2=g2,
        saturation=saturation,
        budget=budget,
        detected_counts_per_s=config.detected_counts_per_s,
        rep_rate_hz=config.rep_rate_hz or settings.get_rep_rate_hz(),
        pump_power_density_w_cm2=config.pump_power_density_w_cm2,
    )
    details = {
        "lifetime_cavity": cavity_lifetime,
        "lifetime_reference": reference_lifetime,
        "q_factor": q,
        "saturation": saturation,
        "g2": g2 if config.histogram else None,
    }
    writer.write_json({"report": report, "analyses": details}, out / "source_report.json")

    rows = [
        (name, m.value, m.sigma)
        for name, m in (
            ("lifetime cavity [ps]", report.lifetime_cavity_ps),
            ("lifetime reference [ps]", report.lifetime_reference_ps),
            ("Purcell factor", report.purcell),
            ("Q factor", report.q_factor),
            ("g2(0)", report.g2_zero),
            ("saturated rate [1/s]", report.saturated_counts_per_s),
            ("extraction efficiency", report.extraction_efficiency),
        )
        if m is not None
    ]
    if report.budget is not None:
        rows.append(("setup transmission", report.budget.transmission, report.budget.overall.sigma))
    print(format_table(rows, ["quantity", "value", "sigma"]))
    return 0


def cmd_simulate_histogram(args: argparse.Namespace, settings: Settings) -> int:
    """Sample a coincidence histogram and write CSV + sidecar."""
    config: HistogramConfig = load_run_config(args.config, HistogramConfig)
    seed = resolve_seed(args.seed, config.seed)
    out = _output_dir(args, config.output_dir)
    recapture = RecaptureSpec(config.recapture.delay_ns, config.recapture.fraction) if config.recapture else None
    hist = simulate_histogram(
        SourceSpec(config.g2_target, recapture),
        rep_period_ns=config.rep_period_ns or 1e9 / settings.get_rep_rate_hz(),
        peak_sigma_ns=config.peak_sigma_ns,
        total_pairs=config.total_pairs,
        seed=seed,
        bin_width_ns=config.bin_width_ns,
        n_periods=config.n_periods,
    )
    write_histogram(hist, out / "histogram.csv", _writer(settings))
    print(
        format_table(
            [
                ("g2 target", config.g2_target),
                ("bins", int(hist.counts.size)),
                ("total counts", float(hist.counts.sum())),
                ("seed", seed),
            ],
            ["quantity", "value"],
        )
    )
    return 0


def cmd_yield(args: argparse.Namespace, settings: Settings) -> int:
    """Monte-Carlo yield of tunable devices."""
    config: YieldConfig = load_run_config(args.config, YieldConfig)
    seed = resolve_seed(args.seed, config.seed)
    out = _output_dir(args, config.output_dir)

    e = config.emitters
    emitters = EmitterDistribution(
        DistributionKind(e.kind), e.low_ev, e.high_ev, e.mean_ev, e.std_ev, e.fab_shift_std_meV
    )
    t = config.tuning
    qd_slope = t.de_dt_qd_meV_per_k
    if qd_slope is None:
        qd_slope = float(settings.get("cavity.dE_dT_qd_meV_per_K", -0.05))
    mode_slope = t.de_dt_mode_meV_per_k
    if mode_slope is None:
        mode_slope = float(settings.get("cavity.dE_dT_mode_meV_per_K", -0.01))
    tuning = TuningRange(t.t_min_k, t.t_max_k, qd_slope, mode_slope)
    mode = ModeIndex(config.mode.n_phi, config.mode.n_r)
    estimate = estimate_yield(
        _cavity(settings, config),
        emitters,
        tuning,
        _grid(settings, config),
        trials=args.trials or config.trials,
        seed=seed,
        mode=mode,
        q_factor=config.q_factor or float(settings.get("cavity.q_factor", 1438.0)),
        threads=args.threads,
    )
    _writer(settings).write_json({"seed": seed, "yield": estimate}, out / "yield.json")
    print(
        format_table(
            [
                ("yield", estimate.yield_fraction),
                ("successes", estimate.successes),
                ("trials", estimate.trials),
                ("95% CI", f"[{estimate.ci_low:.4f}, {estimate.ci_high:.4f}]"),
            ],
            ["quantity", "value"],
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dotfoundry", description="Quantum-dot device pipeline")
    parser.add_argument("--settings", default="config.yaml", help="Project defaults (YAML)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, config_required: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if config_required:
            p.add_argument("config", help="Run config (JSON)")
        p.add_argument("--output-dir", default=None, help="Overrides output_dir of the run config")
        p.set_defaults(func=func)
        return p

    p = add("simulate-frame", cmd_simulate_frame, "Render a two-color frame pair")
    p.add_argument("--seed", type=int, default=None)

    p = add("simulate-histogram", cmd_simulate_histogram, "Sample a coincidence histogram")
    p.add_argument("--seed", type=int, default=None)

    p = add("localize", cmd_localize, "Localize an emitter against alignment marks", config_required=False)
    p.add_argument("--surface", help="Surface-focus frame (PGM)")
    p.add_argument("--emitter", help="Emitter-focus frame (PGM)")
    p.add_argument("--layout", help="Mark layout (JSON)")
    p.add_argument("--output", help="Report path (default <output-dir>/report.json)")
    p.add_argument("--scenes", type=int, default=None, help="Simulate and localize N jittered scenes")
    p.add_argument("--config", help="Scene config for --scenes")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)

    p = add("design", cmd_design, "Design a micropillar for a target line", config_required=False)
    p.add_argument("--config", help="Design config (JSON)")
    p.add_argument("--target-nm", type=float, default=None)
    p.add_argument("--target-ev", type=float, default=None)

    add("characterize", cmd_characterize, "Build a single-photon source report")

    p = add("yield", cmd_yield, "Monte-Carlo device yield")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    settings = Settings(config_path=args.settings)
    setup_logging(settings, args.verbose, args.quiet)
    logger.debug(f"Running {args.command}")
    try:
        return args.func(args, settings)
    except DegenerateDataError as e:  # flat input data is a data error, not a usage error
        logger.error(f"{args.command}: {e}")
        return 1
    except (ConfigError, ArgumentError) as e:
        logger.error(f"{args.command}: {e}")
        return 2
    except (DotFoundryError, OSError) as e:
        logger.error(f"{args.command}: {e}")
        return 1
