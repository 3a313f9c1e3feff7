"""
Export module - machine-readable reports and measurement data files.
"""

from .report_writer import ReportWriter, format_table
from .data_io import (
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
    write_uncertainty_histograms,
)

__all__ = [
    "ReportWriter",
    "format_table",
    "read_columns",
    "read_decay_trace",
    "read_histogram",
    "read_json",
    "read_saturation",
    "read_spectrum",
    "write_decay_trace",
    "write_histogram",
    "write_mode_curve",
    "write_spectrum",
    "write_uncertainty_histograms",
]
