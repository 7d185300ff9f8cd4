"""JSON report and CSV sidecar output."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

from hyperlab.models.report import Report

LOGGER = logging.getLogger(__name__)

TABLE_HEADERS: dict[str, list[str]] = {
    "exponents": ["sample", "bundle", "exponent"],
    "ratio_series": ["point", "n", "log_ratio"],
    "derivative_probe": ["point", "scale", "leaf_distance", "ratio"],
    "periodic": ["period", "coords...", "relative_gaps..."],
    "leaf": ["arclength", "coords..."],
    "density": ["arclength", "coords...", "rho"],
    "balls": ["sample", "n", "ball_length"],
    "birkhoff": ["leaf_id", "t", "birkhoff_avg"],
    "pushed_mass": ["cell_i", "cell_j", "pushed_mass"],
    "center_leaf": ["leaf_id", "parameter", "coords..."],
}


def _header(table: str) -> list[str]:
    key = table.rsplit("-", 1)[-1]
    return TABLE_HEADERS.get(key, ["values..."])


def write_report(report: Report, out_dir: Path) -> Path:
    """Write ``report.json`` plus one CSV per block table; returns the JSON path."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sidecars: list[str] = []
    for block in report.blocks:
        for table, rows in block.tables.items():
            name = f"{block.name}-{table}.csv"
            with (out_dir / name).open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(_header(table))
                writer.writerows(rows)
            sidecars.append(name)
    report.sidecars = sidecars
    payload = report.model_dump(mode="json", exclude={"blocks": {"__all__": {"tables"}}})
    path = out_dir / "report.json"
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    LOGGER.info("wrote %s and %d sidecars", path, len(sidecars))
    return path
