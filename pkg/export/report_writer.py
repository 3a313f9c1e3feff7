"""
Report Writer - Deterministic JSON and CSV output.

Format: sorted keys, two-space indent, floats rounded to a fixed number of
significant digits (9 by default), NaN/inf written as null. Identical
inputs give byte-identical files.
"""

import json
import math
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ReportWriter:
    """
    Writes machine-readable reports.

    Usage:
        writer = ReportWriter(significant_digits=9)

        # JSON report
        writer.write_json(report.to_dict(), "out/report.json")

        # CSV table
        writer.write_csv({"diameter_um": d, "energy_eV": e}, "out/curve.csv")
    """

    def __init__(self, significant_digits: int = 9):
        if significant_digits < 1:
            raise ValueError(f"significant_digits must be >= 1, got {significant_digits}")
        self.significant_digits = significant_digits

    def normalize(self, value: Any) -> Any:
        """Convert to plain JSON types with rounded floats."""
        if isinstance(value, dict):
            return {str(k): self.normalize(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [self.normalize(v) for v in value]
        if isinstance(value, np.ndarray):
            return [self.normalize(v) for v in value.tolist()]
        if isinstance(value, Enum):
            return value.value
        if hasattr(value, "to_dict"):
            return self.normalize(value.to_dict())
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            value = float(value)
            if not math.isfinite(value):
                return None
            return float(f"{value:.{self.significant_digits}g}")
        if isinstance(value, Path):
            return str(value)
        return value

    def to_json_text(self, data: Any) -> str:
        return json.dumps(self.normalize(data), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write_json(self, data: Any, path: PathLike) -> Path:
        """Write `data` as deterministic JSON."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json_text(data), encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path

    def write_csv(self, columns: Dict[str, Sequence[Any]], path: PathLike) -> Path:
        """Write named columns (in the given order) as CSV with a header row."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame({name: list(values) for name, values in columns.items()})
        frame.to_csv(
            path,
            index=False,
            float_format=f"%.{self.significant_digits}g",
            lineterminator="\n",
        )
        logger.info(f"Wrote {path} ({len(frame)} rows)")
        return path

    def write_rows(self, header: List[str], rows: Sequence[Sequence[Any]], path: PathLike) -> Path:
        """Write row tuples under `header`."""
        columns = {name: [row[i] for row in rows] for i, name in enumerate(header)}
        return self.write_csv(columns, path)


def format_table(rows: Sequence[Sequence[Any]], header: Optional[Sequence[str]] = None) -> str:
    """Plain-text table for the terminal."""
    cells = [[_cell(v) for v in row] for row in rows]
    if header:
        cells.insert(0, [str(h) for h in header])
    if not cells:
        return ""
    widths = [max(len(row[i]) for row in cells if i < len(row)) for i in range(max(len(r) for r in cells))]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip() for row in cells]
    if header:
        lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
