"""Application settings and numeric thresholds."""

from __future__ import annotations

import os
from pathlib import Path

from pydantic import BaseModel, Field


class VerdictThresholds(BaseModel):
    """Declared thresholds turning finite data into smooth/singular verdicts."""

    b3_slope_relative: float = 1e-3
    ratio_stabilization: float = 0.05
    holder_margin: float = 0.03
    ac_spread_ratio: float = 1.5
    cq_drop_factor: float = 2.0
    cq_mass_fraction: float = 0.9
    pesin_relative_floor: float = 0.02
    stderr_multiplier: float = 3.0


class AppSettings(BaseModel):
    """Settings used by the laboratory."""

    app_name: str = "hyperlab"
    perturbation_threshold: float = 0.75
    conjugacy_tolerance: float = 1e-8
    conjugacy_max_terms: int = 10_000
    splitting_transient: int = 60
    splitting_residual: float = 1e-8
    min_domination_margin: float = 1e-3
    leaf_step: float = 2e-3
    leaf_min_step: float = 1e-6
    leaf_max_half_length: float = 2.0
    density_tail: float = 1e-6
    entropy_min_window: int = 8
    entropy_min_r2: float = 0.99
    newton_tolerance: float = 1e-12
    newton_max_iter: int = 50
    inverse_tolerance: float = 1e-12
    batch_blocks: int = 20
    workers: int = 1
    thresholds: VerdictThresholds = Field(default_factory=VerdictThresholds)
    cache_dir: Path = Field(default_factory=lambda: Path(".hyperlab-cache"))
    output_dir: Path = Field(default_factory=lambda: Path("hyperlab-out"))


def get_settings() -> AppSettings:
    """Return default settings with environment overrides applied."""
    overrides: dict[str, object] = {}
    workers = os.environ.get("HYPERLAB_WORKERS")
    if workers:
        overrides["workers"] = max(1, int(workers))
    cache_dir = os.environ.get("HYPERLAB_CACHE_DIR")
    if cache_dir:
        overrides["cache_dir"] = Path(cache_dir)
    output_dir = os.environ.get("HYPERLAB_OUTPUT_DIR")
    if output_dir:
        overrides["output_dir"] = Path(output_dir)
    return AppSettings(**overrides)
